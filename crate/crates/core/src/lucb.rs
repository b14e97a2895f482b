//! Best-arm identification with per-arm confidence sequences.
//!
//! Arms are ranked by empirical mean; the contender is the weakest member of
//! the current top-m (smallest lower bound) and the challenger the strongest
//! outsider (largest upper bound). Only those two arms are pulled each round.
//! The procedure stops once U_challenger - L_contender < epsilon. Bounds are
//! the endpoints of each arm's running-intersection interval, so they are
//! monotone per arm.
//!
//! Reward sources are either known laws (simulated with a per-arm seeded
//! generator, so pull sequences are reproducible and method-independent) or
//! replay buffers consumed in file order.

use crate::driver::{CsStream, MethodSpec};
use crate::engine::BettingConfig;
use crate::error::{Error, Result};
use crate::oracle::TrueLaw;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Where an arm's rewards come from.
#[derive(Debug, Clone)]
pub enum RewardSource {
    Law { law: TrueLaw, rng: Box<ChaCha12Rng> },
    Replay { values: Vec<f64>, pos: usize },
}

/// One bandit arm: a reward source plus its confidence-sequence state.
#[derive(Debug, Clone)]
pub struct Arm {
    pub name: String,
    source: RewardSource,
    stream: CsStream,
    pulls: u64,
    sum: f64,
    degenerate_interval: bool,
}

impl Arm {
    pub fn simulated(
        name: impl Into<String>,
        law: TrueLaw,
        spec: &MethodSpec,
        config: BettingConfig,
        seed: u64,
    ) -> Result<Self> {
        law.validate()?;
        Ok(Arm {
            name: name.into(),
            source: RewardSource::Law {
                law,
                rng: Box::new(ChaCha12Rng::seed_from_u64(seed)),
            },
            stream: CsStream::new(spec, config)?,
            pulls: 0,
            sum: 0.0,
            degenerate_interval: false,
        })
    }

    pub fn replay(
        name: impl Into<String>,
        values: Vec<f64>,
        spec: &MethodSpec,
        config: BettingConfig,
    ) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ObservationOutOfRange { value: v, index: i });
            }
        }
        Ok(Arm {
            name: name.into(),
            source: RewardSource::Replay { values, pos: 0 },
            stream: CsStream::new(spec, config)?,
            pulls: 0,
            sum: 0.0,
            degenerate_interval: false,
        })
    }

    /// Draws one reward and feeds it to the arm's confidence sequence.
    /// Returns `None` when a replay buffer is exhausted.
    fn pull(&mut self) -> Result<Option<f64>> {
        let x = match &mut self.source {
            RewardSource::Law { law, rng } => law.sample(rng),
            RewardSource::Replay { values, pos } => {
                if *pos >= values.len() {
                    return Ok(None);
                }
                let v = values[*pos];
                *pos += 1;
                v
            }
        };
        let rec = self.stream.step(x)?;
        if rec.running.empty {
            self.degenerate_interval = true;
        }
        self.pulls += 1;
        self.sum += x;
        Ok(Some(x))
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn empirical_mean(&self) -> f64 {
        if self.pulls == 0 {
            0.0
        } else {
            self.sum / self.pulls as f64
        }
    }

    /// Lower/upper confidence bounds: the running-intersection interval
    /// endpoints. If the interval has gone empty (an alpha-probability
    /// pathology) the bounds collapse to the empirical mean and the arm is
    /// flagged.
    pub fn bounds(&self) -> (f64, f64) {
        let iv = self.stream.ledger().running_interval();
        if iv.empty {
            let m = self.empirical_mean();
            (m, m)
        } else {
            (iv.lower, iv.upper)
        }
    }
}

/// LUCB configuration. `alpha` is the per-arm confidence level; with
/// `union_bound` set it is divided by the number of arms.
#[derive(Debug, Clone, Copy)]
pub struct LucbConfig {
    pub m: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_pulls: u64,
    pub union_bound: bool,
}

impl Default for LucbConfig {
    fn default() -> Self {
        LucbConfig {
            m: 1,
            alpha: 0.1,
            epsilon: 0.1,
            max_pulls: 100_000,
            union_bound: false,
        }
    }
}

impl LucbConfig {
    pub fn validate(&self, n_arms: usize) -> Result<()> {
        if n_arms < 2 {
            return Err(Error::InvalidParameter {
                name: "arms",
                value: n_arms as f64,
                constraint: "need at least 2 arms",
            });
        }
        if self.m == 0 || self.m >= n_arms {
            return Err(Error::InvalidParameter {
                name: "m",
                value: self.m as f64,
                constraint: "must satisfy 1 <= m < number of arms",
            });
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: self.epsilon,
                constraint: "must be nonnegative",
            });
        }
        Ok(())
    }

    pub fn per_arm_alpha(&self, n_arms: usize) -> f64 {
        if self.union_bound {
            self.alpha / n_arms as f64
        } else {
            self.alpha
        }
    }
}

/// One trace row: round index, contender, challenger, then per-arm bounds.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: u64,
    pub contender: usize,
    pub challenger: usize,
    pub bounds: Vec<(f64, f64)>,
}

/// Mutable LUCB state between rounds.
#[derive(Debug, Clone)]
pub struct LucbState {
    pub arms: Vec<Arm>,
    config: LucbConfig,
    t: u64,
    total_pulls: u64,
    contender: usize,
    challenger: usize,
    stopped: bool,
    truncated: bool,
    trace: Vec<TraceRow>,
}

/// Final outcome of a run.
#[derive(Debug, Clone)]
pub struct LucbOutcome {
    /// Indices of the selected top-m arms, best first.
    pub selected: Vec<usize>,
    pub total_pulls: u64,
    pub rounds: u64,
    /// Set when max_pulls was reached or a replay buffer ran dry.
    pub truncated: bool,
    /// Set when some arm's interval went empty at any point.
    pub degenerate_interval: bool,
}

/// Arm indices sorted by empirical mean, descending; ties break toward the
/// lower index.
fn ranking(arms: &[Arm]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..arms.len()).collect();
    idx.sort_by(|&i, &j| {
        arms[j]
            .empirical_mean()
            .partial_cmp(&arms[i].empirical_mean())
            .unwrap()
            .then(i.cmp(&j))
    });
    idx
}

fn identify(arms: &[Arm], m: usize) -> (usize, usize) {
    let order = ranking(arms);
    let (top, rest) = order.split_at(m);
    let mut contender = top[0];
    let mut best_l = f64::INFINITY;
    for &a in top {
        let (l, _) = arms[a].bounds();
        if l < best_l || (l == best_l && a < contender) {
            best_l = l;
            contender = a;
        }
    }
    let mut challenger = rest[0];
    let mut best_u = f64::NEG_INFINITY;
    for &a in rest {
        let (_, u) = arms[a].bounds();
        if u > best_u || (u == best_u && a < challenger) {
            best_u = u;
            challenger = a;
        }
    }
    (contender, challenger)
}

/// Pulls every arm once and computes the initial contender/challenger.
pub fn lucb_init(mut arms: Vec<Arm>, config: LucbConfig) -> Result<LucbState> {
    config.validate(arms.len())?;
    let mut truncated = false;
    for arm in &mut arms {
        if arm.pull()?.is_none() {
            truncated = true;
        }
    }
    let t = arms.len() as u64;
    let total_pulls = arms.iter().map(|a| a.pulls()).sum();
    let (contender, challenger) = identify(&arms, config.m);
    let mut state = LucbState {
        arms,
        config,
        t,
        total_pulls,
        contender,
        challenger,
        stopped: false,
        truncated,
        trace: Vec::new(),
    };
    state.push_trace();
    Ok(state)
}

impl LucbState {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn total_pulls(&self) -> u64 {
        self.total_pulls
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn contender(&self) -> usize {
        self.contender
    }

    pub fn challenger(&self) -> usize {
        self.challenger
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    fn push_trace(&mut self) {
        self.trace.push(TraceRow {
            t: self.t,
            contender: self.contender,
            challenger: self.challenger,
            bounds: self.arms.iter().map(|a| a.bounds()).collect(),
        });
    }

    fn separation_reached(&self) -> bool {
        let (l_h, _) = self.arms[self.contender].bounds();
        let (_, u_l) = self.arms[self.challenger].bounds();
        u_l - l_h < self.config.epsilon
    }

    /// Current top-m set by empirical mean, best first.
    pub fn selected(&self) -> Vec<usize> {
        ranking(&self.arms)[..self.config.m].to_vec()
    }
}

/// One LUCB round: refuses (setting the stopped flag) when the bounds are
/// already separated, otherwise pulls contender and challenger and
/// recomputes the ranking. Returns whether a pull happened.
pub fn lucb_step(state: &mut LucbState) -> Result<bool> {
    if state.stopped {
        return Ok(false);
    }
    if state.separation_reached() {
        state.stopped = true;
        return Ok(false);
    }
    let (h, l) = (state.contender, state.challenger);
    // Pulls update in arm-index order so the outcome is deterministic.
    let (first, second) = if h <= l { (h, l) } else { (l, h) };
    for a in [first, second] {
        match state.arms[a].pull()? {
            Some(_) => state.total_pulls += 1,
            None => {
                state.truncated = true;
                state.stopped = true;
                return Ok(false);
            }
        }
    }
    state.t += 1;
    let (contender, challenger) = identify(&state.arms, state.config.m);
    state.contender = contender;
    state.challenger = challenger;
    state.push_trace();
    Ok(true)
}

/// Runs until the stopping rule fires or `max_pulls` is exceeded.
pub fn lucb_run(arms: Vec<Arm>, config: LucbConfig) -> Result<(LucbOutcome, LucbState)> {
    let mut state = lucb_init(arms, config)?;
    while !state.stopped {
        if state.total_pulls >= config.max_pulls {
            state.truncated = true;
            break;
        }
        if !lucb_step(&mut state)? {
            break;
        }
    }
    let outcome = LucbOutcome {
        selected: state.selected(),
        total_pulls: state.total_pulls,
        rounds: state.t,
        truncated: state.truncated,
        degenerate_interval: state.arms.iter().any(|a| a.degenerate_interval),
    };
    Ok((outcome, state))
}

/// Replay CSV: header of arm names, one column per arm, values in [0, 1].
/// Short columns are allowed (ragged files); exhaustion surfaces later as a
/// flagged truncation.
pub fn parse_replay_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        context: "replay csv".into(),
        line: 1,
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(Error::Parse {
            context: "replay csv header".into(),
            line: 1,
        });
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        for (k, field) in line.split(',').enumerate() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            if k >= columns.len() {
                return Err(Error::Parse {
                    context: "replay csv: more fields than arms".into(),
                    line: idx + 1,
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                context: "replay csv".into(),
                line: idx + 1,
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ObservationOutOfRange {
                    value: v,
                    index: idx + 1,
                });
            }
            columns[k].push(v);
        }
    }
    Ok(names.into_iter().zip(columns).collect())
}

/// Trace CSV: t, contender, challenger, then L/U per arm.
pub fn render_trace_csv(state: &LucbState) -> String {
    let mut out = String::from("t,contender,challenger");
    for (i, arm) in state.arms.iter().enumerate() {
        out.push_str(&format!(",L_{i}_{name},U_{i}_{name}", name = arm.name));
    }
    out.push('\n');
    for row in &state.trace {
        out.push_str(&format!("{},{},{}", row.t, row.contender, row.challenger));
        for (l, u) in &row.bounds {
            out.push_str(&format!(",{l:.15},{u:.15}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::split_seed;

    fn config_20() -> BettingConfig {
        BettingConfig::new(0.1, 0.95, 20).unwrap()
    }

    fn two_bernoulli_arms(p0: f64, p1: f64, seed: u64) -> Vec<Arm> {
        vec![
            Arm::simulated(
                "a0",
                TrueLaw::Bernoulli(p0),
                &MethodSpec::Empirical,
                config_20(),
                split_seed(seed, 0),
            )
            .unwrap(),
            Arm::simulated(
                "a1",
                TrueLaw::Bernoulli(p1),
                &MethodSpec::Empirical,
                config_20(),
                split_seed(seed, 1),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn init_pulls_each_arm_once() {
        let arms = two_bernoulli_arms(0.9, 0.1, 3);
        let state = lucb_init(arms, LucbConfig::default()).unwrap();
        assert_eq!(state.t(), 2);
        assert!(state.arms.iter().all(|a| a.pulls() == 1));

        let mut four = two_bernoulli_arms(0.9, 0.1, 4);
        four.extend(two_bernoulli_arms(0.5, 0.3, 5));
        let state = lucb_init(four, LucbConfig::default()).unwrap();
        assert_eq!(state.t(), 4);
    }

    #[test]
    fn init_rejects_single_arm() {
        let mut arms = two_bernoulli_arms(0.9, 0.1, 3);
        arms.truncate(1);
        assert!(lucb_init(arms, LucbConfig::default()).is_err());
    }

    #[test]
    fn step_pulls_contender_and_challenger_only() {
        let arms = two_bernoulli_arms(0.9, 0.1, 11);
        let mut state = lucb_init(arms, LucbConfig::default()).unwrap();
        let before: Vec<u64> = state.arms.iter().map(|a| a.pulls()).collect();
        assert!(lucb_step(&mut state).unwrap());
        let after: Vec<u64> = state.arms.iter().map(|a| a.pulls()).collect();
        // with two arms and m = 1, both arms are exactly the pair pulled
        assert_eq!(after[0], before[0] + 1);
        assert_eq!(after[1], before[1] + 1);
    }

    #[test]
    fn step_refuses_once_separated() {
        let arms = two_bernoulli_arms(0.9, 0.1, 13);
        let mut state = lucb_init(arms, LucbConfig { epsilon: 2.0, ..LucbConfig::default() })
            .unwrap();
        // epsilon = 2 separates immediately (U - L < 2 always)
        assert!(!lucb_step(&mut state).unwrap());
        assert!(state.stopped());
        let (l_h, _) = state.arms[state.contender()].bounds();
        let (_, u_l) = state.arms[state.challenger()].bounds();
        assert!(l_h > u_l - 2.0);
    }

    #[test]
    fn run_identifies_clearly_best_arm() {
        let (outcome, _) = lucb_run(
            two_bernoulli_arms(0.9, 0.1, 21),
            LucbConfig::default(),
        )
        .unwrap();
        assert!(!outcome.truncated);
        assert_eq!(outcome.selected, vec![0]);
    }

    #[test]
    fn identical_arms_terminate_with_loose_epsilon() {
        let arms = two_bernoulli_arms(0.5, 0.5, 33);
        let (outcome, _) = lucb_run(
            arms,
            LucbConfig {
                epsilon: 0.5,
                ..LucbConfig::default()
            },
        )
        .unwrap();
        assert!(!outcome.truncated, "pulls: {}", outcome.total_pulls);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        // two replay arms with identical constant rewards
        let spec = MethodSpec::Empirical;
        let arms = vec![
            Arm::replay("a", vec![0.5; 10], &spec, config_20()).unwrap(),
            Arm::replay("b", vec![0.5; 10], &spec, config_20()).unwrap(),
        ];
        let state = lucb_init(arms, LucbConfig { epsilon: 0.0, ..Default::default() }).unwrap();
        assert_eq!(state.selected(), vec![0]);
        assert_eq!(state.contender(), 0);
        assert_eq!(state.challenger(), 1);
    }

    #[test]
    fn replay_exhaustion_flags_truncation() {
        let spec = MethodSpec::Empirical;
        let arms = vec![
            Arm::replay("a", vec![0.9, 0.8, 0.9], &spec, config_20()).unwrap(),
            Arm::replay("b", vec![0.1, 0.2, 0.1], &spec, config_20()).unwrap(),
        ];
        let (outcome, _) = lucb_run(
            arms,
            LucbConfig {
                epsilon: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(outcome.truncated);
    }

    #[test]
    fn bounds_are_monotone_per_arm() {
        let arms = two_bernoulli_arms(0.7, 0.3, 55);
        let (_, state) = lucb_run(arms, LucbConfig::default()).unwrap();
        for arm_idx in 0..2 {
            let mut prev = (0.0f64, 1.0f64);
            for row in state.trace() {
                let (l, u) = row.bounds[arm_idx];
                assert!(l >= prev.0 - 1e-15);
                assert!(u <= prev.1 + 1e-15);
                prev = (l, u);
            }
        }
    }

    #[test]
    fn replay_csv_parsing() {
        let parsed = parse_replay_csv("armA,armB\n0.5,0.25\n0.75,0.5\n").unwrap();
        assert_eq!(parsed[0].0, "armA");
        assert_eq!(parsed[0].1, vec![0.5, 0.75]);
        assert_eq!(parsed[1].1, vec![0.25, 0.5]);

        assert!(parse_replay_csv("a,b\n0.5,oops\n").is_err());
        assert!(parse_replay_csv("a,b\n0.5,1.5\n").is_err());
    }

    #[test]
    fn symmetric_top_m_selection() {
        // m = arms-1 on reversed means selects the complement of the worst.
        let mk = |seed| {
            vec![
                Arm::simulated("x", TrueLaw::Bernoulli(0.8), &MethodSpec::Empirical, config_20(), split_seed(seed, 0)).unwrap(),
                Arm::simulated("y", TrueLaw::Bernoulli(0.5), &MethodSpec::Empirical, config_20(), split_seed(seed, 1)).unwrap(),
                Arm::simulated("z", TrueLaw::Bernoulli(0.2), &MethodSpec::Empirical, config_20(), split_seed(seed, 2)).unwrap(),
            ]
        };
        let (outcome, _) = lucb_run(
            mk(101),
            LucbConfig {
                m: 2,
                ..LucbConfig::default()
            },
        )
        .unwrap();
        let mut sel = outcome.selected.clone();
        sel.sort_unstable();
        assert_eq!(sel, vec![0, 1]);
    }
}
