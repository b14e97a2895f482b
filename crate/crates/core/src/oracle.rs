//! Known-distribution baselines and diagnostics.
//!
//! When the data law is known, the log-optimal constant stake for each
//! candidate mean can be computed directly; running the engine with those
//! stakes gives the oracle confidence sequence against which the adaptive
//! methods are normalized. This module also provides the Wasserstein-1
//! distance on [0, 1] (the quantity controlling how fast a forecast-driven
//! stake approaches the oracle one) and the explicit constants appearing in
//! the finite-sample regret and separation bounds.

use crate::betting::{self, Atom, BetaComponent, LambdaSolution, PredictiveDistribution};
use crate::driver::{CsStream, MethodSpec, StepRecord};
use crate::engine::BettingConfig;
use crate::error::{Error, Result};
use crate::num;
use rand::{Rng, RngExt};
use rand_distr::Distribution;
use statrs::distribution::{Beta as StatBeta, ContinuousCDF};

/// Data-generating distribution on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum TrueLaw {
    Bernoulli(f64),
    Beta { a: f64, b: f64 },
    BetaMixture(Vec<BetaComponent>),
    FiniteAtoms(Vec<Atom>),
}

impl TrueLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrueLaw::Bernoulli(p) => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "bernoulli p",
                        value: *p,
                        constraint: "must lie in (0, 1)",
                    });
                }
            }
            TrueLaw::Beta { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "beta shape",
                        value: a.min(*b),
                        constraint: "must be positive",
                    });
                }
            }
            TrueLaw::BetaMixture(_) | TrueLaw::FiniteAtoms(_) => {
                self.to_predictive_checked()?;
            }
        }
        Ok(())
    }

    fn to_predictive_checked(&self) -> Result<PredictiveDistribution> {
        match self {
            TrueLaw::Bernoulli(p) => PredictiveDistribution::from_atoms(vec![
                Atom { x: 0.0, w: 1.0 - p },
                Atom { x: 1.0, w: *p },
            ]),
            TrueLaw::Beta { a, b } => PredictiveDistribution::new(
                vec![],
                vec![BetaComponent {
                    a: *a,
                    b: *b,
                    w: 1.0,
                }],
            ),
            TrueLaw::BetaMixture(comps) => PredictiveDistribution::new(vec![], comps.clone()),
            TrueLaw::FiniteAtoms(atoms) => PredictiveDistribution::from_atoms(atoms.clone()),
        }
    }

    /// The law as a predictive-distribution mixture; growth and stake
    /// computations share the forecast machinery.
    pub fn to_predictive(&self) -> PredictiveDistribution {
        self.to_predictive_checked().expect("law validated")
    }

    pub fn mean(&self) -> f64 {
        self.to_predictive().mean()
    }

    /// True when the law is purely atomic (Wasserstein distances against it
    /// are computed exactly).
    pub fn is_atomic(&self) -> bool {
        matches!(self, TrueLaw::Bernoulli(_) | TrueLaw::FiniteAtoms(_))
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            TrueLaw::Bernoulli(p) => {
                if t < 0.0 {
                    0.0
                } else if t < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            TrueLaw::Beta { a, b } => StatBeta::new(*a, *b).expect("validated").cdf(t),
            TrueLaw::BetaMixture(comps) => comps
                .iter()
                .map(|c| c.w * StatBeta::new(c.a, c.b).expect("validated").cdf(t))
                .sum(),
            TrueLaw::FiniteAtoms(atoms) => {
                atoms.iter().filter(|a| a.x <= t).map(|a| a.w).sum()
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            TrueLaw::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            TrueLaw::Beta { a, b } => rand_distr::Beta::new(*a, *b)
                .expect("validated")
                .sample(rng),
            TrueLaw::BetaMixture(comps) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in comps {
                    acc += c.w;
                    if u < acc {
                        return rand_distr::Beta::new(c.a, c.b)
                            .expect("validated")
                            .sample(rng);
                    }
                }
                let last = comps.last().expect("nonempty mixture");
                rand_distr::Beta::new(last.a, last.b)
                    .expect("validated")
                    .sample(rng)
            }
            TrueLaw::FiniteAtoms(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.w;
                    if u < acc {
                        return a.x;
                    }
                }
                atoms.last().expect("nonempty atoms").x
            }
        }
    }

    /// Draws `n` observations.
    pub fn sample_stream<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Expected log-evidence M(lambda, mu) of a constant stake under the law.
pub fn oracle_growth(law: &TrueLaw, lambda: f64, mu: f64) -> Result<f64> {
    betting::expected_loggrowth(&law.to_predictive(), lambda, mu)
}

const ORACLE_TOL: f64 = 1e-13;

/// Log-optimal constant stake for candidate mean `mu` under the law.
pub fn oracle_lambda(law: &TrueLaw, mu: f64, c: f64) -> Result<LambdaSolution> {
    betting::solve_lambda(&law.to_predictive(), mu, c, ORACLE_TOL)
}

/// Oracle stakes at every grid point.
pub fn oracle_lambdas_on_grid(
    law: &TrueLaw,
    grid: &crate::engine::CandidateGrid,
    c: f64,
) -> Result<Vec<f64>> {
    let atoms = law.to_predictive().solver_atoms(num::default_quadrature());
    let mut out = Vec::with_capacity(grid.len());
    let mut warm = None;
    for &mu in grid.points() {
        let sol = betting::solve_lambda_atoms(&atoms, mu, c, ORACLE_TOL, warm)?;
        warm = Some(sol.lambda);
        out.push(sol.lambda);
    }
    Ok(out)
}

/// Runs the engine over `xs` with the constant oracle stakes.
pub fn oracle_cs_stream(
    law: &TrueLaw,
    xs: &[f64],
    config: &BettingConfig,
) -> Result<Vec<StepRecord>> {
    let mut stream = CsStream::new(&MethodSpec::Oracle { law: law.clone() }, *config)?;
    xs.iter().map(|&x| stream.step(x)).collect()
}

/// Lipschitz constant of the log factor in its argument over [0, 1]:
/// c / ((1 - c) min(mu, 1 - mu)). Controls how forecast error in
/// Wasserstein distance transfers to lost log-growth.
pub fn lipschitz_const(mu: f64, c: f64) -> f64 {
    c / ((1.0 - c) * mu.min(1.0 - mu))
}

/// Separation rate c(t) = min(-log(1 - t/2), t^2/2): with tau = 0 the
/// rescaled pseudo-likelihood at means t-far from the sample mean is at most
/// exp(-n c(t)).
pub fn separation_rate(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            constraint: "must lie in (0, 1]",
        });
    }
    Ok((-(1.0 - 0.5 * t).ln()).min(0.5 * t * t))
}

/// One side of a Wasserstein-1 computation.
#[derive(Debug, Clone, Copy)]
pub enum W1Side<'a> {
    Pred(&'a PredictiveDistribution),
    Law(&'a TrueLaw),
}

impl<'a> W1Side<'a> {
    /// Atom representation when the distribution is purely atomic.
    fn exact_atoms(&self) -> Option<Vec<Atom>> {
        match self {
            W1Side::Pred(p) => p.betas().is_empty().then(|| p.atoms().to_vec()),
            W1Side::Law(l) => l.is_atomic().then(|| l.to_predictive().atoms().to_vec()),
        }
    }

    /// CDF sampled at the midpoints (j + 1/2) / n. Predictive beta
    /// components are projected onto the quadrature atoms (the same
    /// projection the stake solver integrates against); law beta components
    /// use their exact CDF.
    fn cdf_grid(&self, n: usize) -> Vec<f64> {
        match self {
            W1Side::Pred(p) => {
                let atoms = p.solver_atoms(num::default_quadrature());
                atom_cdf_grid(&atoms, n)
            }
            W1Side::Law(l) => {
                if l.is_atomic() {
                    atom_cdf_grid(l.to_predictive().atoms(), n)
                } else {
                    (0..n)
                        .map(|j| l.cdf((j as f64 + 0.5) / n as f64))
                        .collect()
                }
            }
        }
    }
}

fn atom_cdf_grid(atoms: &[Atom], n: usize) -> Vec<f64> {
    let mut sorted: Vec<Atom> = atoms.to_vec();
    sorted.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut k = 0;
    for j in 0..n {
        let t = (j as f64 + 0.5) / n as f64;
        while k < sorted.len() && sorted[k].x <= t {
            acc += sorted[k].w;
            k += 1;
        }
        out.push(acc);
    }
    out
}

/// Number of CDF evaluation points for distances involving a continuous
/// component; the discretization error is O(1/points).
pub const W1_GRID: usize = 4096;

/// Wasserstein-1 distance on [0, 1]: the integral of |F_p - F_q|. Exact via
/// a sorted merge when both sides are purely atomic, otherwise evaluated on
/// the midpoint grid.
pub fn wasserstein1(p: W1Side, q: W1Side) -> f64 {
    if let (Some(pa), Some(qa)) = (p.exact_atoms(), q.exact_atoms()) {
        return w1_atoms(&pa, &qa);
    }
    let fp = p.cdf_grid(W1_GRID);
    let fq = q.cdf_grid(W1_GRID);
    fp.iter()
        .zip(fq.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / W1_GRID as f64
}

fn w1_atoms(p: &[Atom], q: &[Atom]) -> f64 {
    let mut ps: Vec<Atom> = p.to_vec();
    let mut qs: Vec<Atom> = q.to_vec();
    ps.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    qs.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    let mut cuts: Vec<f64> = ps.iter().chain(qs.iter()).map(|a| a.x).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut dist = 0.0;
    let (mut fp, mut fq) = (0.0, 0.0);
    let (mut i, mut j) = (0, 0);
    for w in cuts.windows(2) {
        while i < ps.len() && ps[i].x <= w[0] {
            fp += ps[i].w;
            i += 1;
        }
        while j < qs.len() && qs[j].x <= w[0] {
            fq += qs[j].w;
            j += 1;
        }
        dist += (fp - fq).abs() * (w[1] - w[0]);
    }
    dist
}

/// Precomputed law CDF for repeated Wasserstein evaluations against the same
/// law (simulation harnesses call this once per scenario).
#[derive(Debug, Clone)]
pub struct LawW1 {
    law_atoms: Option<Vec<Atom>>,
    law_grid: Option<Vec<f64>>,
}

impl LawW1 {
    pub fn new(law: &TrueLaw) -> Self {
        if law.is_atomic() {
            LawW1 {
                law_atoms: Some(law.to_predictive().atoms().to_vec()),
                law_grid: None,
            }
        } else {
            LawW1 {
                law_atoms: None,
                law_grid: Some(W1Side::Law(law).cdf_grid(W1_GRID)),
            }
        }
    }

    pub fn distance(&self, pred: &PredictiveDistribution) -> f64 {
        if pred.betas().is_empty() {
            return self.distance_atoms(pred.atoms());
        }
        let fp = W1Side::Pred(pred).cdf_grid(W1_GRID);
        self.distance_grid(&fp)
    }

    /// Distance from a bare atom list (e.g. a stream's forecast projection).
    pub fn distance_atoms(&self, atoms: &[Atom]) -> f64 {
        if let Some(law_atoms) = &self.law_atoms {
            return w1_atoms(atoms, law_atoms);
        }
        let fp = atom_cdf_grid(atoms, W1_GRID);
        self.distance_grid(&fp)
    }

    fn distance_grid(&self, fp: &[f64]) -> f64 {
        match (&self.law_atoms, &self.law_grid) {
            (_, Some(fq)) => {
                fp.iter()
                    .zip(fq.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / W1_GRID as f64
            }
            (Some(atoms), None) => {
                let fq = atom_cdf_grid(atoms, W1_GRID);
                fp.iter()
                    .zip(fq.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / W1_GRID as f64
            }
            (None, None) => unreachable!("one representation is always present"),
        }
    }
}
