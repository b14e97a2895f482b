//! Per-stream runner tying forecasts to the wealth engine.
//!
//! A `CsStream` owns the grid ledger and one method's state. Each call to
//! [`CsStream::step`] builds the forecast from the history seen so far (the
//! forecast is predictable: it never sees the incoming observation), solves
//! the stake at every grid point, applies the observation, and only then
//! absorbs it into the method state. Stakes from the previous step seed the
//! solver; they are within O(1/n) of the new root, so the Newton iteration
//! typically converges in one or two steps.

use crate::betting::{solve_lambda_atoms, Atom, PredictiveDistribution};
use crate::engine::{
    process_observation, BettingConfig, CandidateGrid, ConfidenceInterval, WealthLedger,
};
use crate::error::Result;
use crate::num;
use crate::oracle::TrueLaw;
use crate::predictives::{
    empirical_predictive, etel_predictive, mdp_predictive, BetaPosterior, BetaPriorSpec,
    EtelConfig, EtelSweep, History,
};

/// Default particle-grid resolution for the beta posterior (40 x 25 = 1000
/// particles).
pub const DEFAULT_K_RHO: usize = 40;
pub const DEFAULT_K_NU: usize = 25;

/// Which forecast drives the stakes.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    /// Uniform atoms at past observations.
    Empirical,
    /// Beta-working-model posterior predictive.
    Parametric {
        prior: BetaPriorSpec,
        k_rho: usize,
        k_nu: usize,
    },
    /// kappa/(kappa+n) parametric + n/(kappa+n) empirical.
    Mdp {
        prior: BetaPriorSpec,
        kappa: f64,
        k_rho: usize,
        k_nu: usize,
    },
    /// Tilted-empirical-likelihood pseudo-predictive; tau = 0 is betel,
    /// tau > 0 retel.
    Etel { config: EtelConfig },
    /// Constant log-optimal stakes for a known law.
    Oracle { law: TrueLaw },
}

impl MethodSpec {
    pub fn parametric(prior: BetaPriorSpec) -> Self {
        MethodSpec::Parametric {
            prior,
            k_rho: DEFAULT_K_RHO,
            k_nu: DEFAULT_K_NU,
        }
    }

    pub fn mdp(prior: BetaPriorSpec, kappa: f64) -> Self {
        MethodSpec::Mdp {
            prior,
            kappa,
            k_rho: DEFAULT_K_RHO,
            k_nu: DEFAULT_K_NU,
        }
    }
}

/// Per-particle quadrature weights for the beta posterior. Particle shapes
/// are fixed at stream construction, so the node weights are computed once
/// and each step's collapse is a weighted sum.
#[derive(Debug, Clone)]
struct BetaNodeCache {
    node_weights: Vec<f64>, // particle-major, quad.len() per particle
    nodes: usize,
}

impl BetaNodeCache {
    fn new(posterior: &BetaPosterior, quad: &crate::num::GaussLegendre) -> Self {
        let nodes = quad.len();
        let shapes = posterior.component_shapes();
        let mut node_weights = vec![0.0; shapes.len() * nodes];
        for (k, &(a, b)) in shapes.iter().enumerate() {
            quad.accumulate_beta_weights(a, b, 1.0, &mut node_weights[k * nodes..(k + 1) * nodes]);
        }
        BetaNodeCache {
            node_weights,
            nodes,
        }
    }

    /// Appends the collapsed posterior predictive, scaled by `scale`, as
    /// atoms at the quadrature nodes.
    fn collapse_into(
        &self,
        posterior: &BetaPosterior,
        quad: &crate::num::GaussLegendre,
        scale: f64,
        out: &mut Vec<Atom>,
    ) {
        let mut acc = vec![0.0; self.nodes];
        for (k, w) in posterior.weights().into_iter().enumerate() {
            if w < num::NEGLIGIBLE_WEIGHT {
                continue;
            }
            let row = &self.node_weights[k * self.nodes..(k + 1) * self.nodes];
            for (a, nw) in acc.iter_mut().zip(row.iter()) {
                *a += w * nw;
            }
        }
        out.extend(
            quad.x
                .iter()
                .zip(acc.iter())
                .filter(|(_, &w)| w > 0.0)
                .map(|(&x, &w)| Atom { x, w: w * scale }),
        );
    }
}

#[derive(Debug, Clone)]
enum MethodState {
    Empirical {
        history: History,
    },
    Parametric {
        posterior: BetaPosterior,
        cache: BetaNodeCache,
    },
    Mdp {
        posterior: BetaPosterior,
        history: History,
        kappa: f64,
        cache: BetaNodeCache,
    },
    Etel {
        history: History,
        sweep: EtelSweep,
    },
    Oracle {
        stakes: Vec<f64>,
    },
}

/// Intervals and bookkeeping for one processed observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: u64,
    pub x: f64,
    pub raw: ConfidenceInterval,
    pub running: ConfidenceInterval,
}

/// Stateful confidence-sequence runner for a single observation stream.
#[derive(Debug, Clone)]
pub struct CsStream {
    config: BettingConfig,
    grid: CandidateGrid,
    ledger: WealthLedger,
    state: MethodState,
    stakes: Vec<f64>,
    solve_tol: f64,
}

/// Default tolerance on the first-order-condition residual of each stake.
pub const STAKE_TOL: f64 = 1e-10;

impl CsStream {
    pub fn new(spec: &MethodSpec, config: BettingConfig) -> Result<Self> {
        let config = BettingConfig::new(config.alpha, config.c, config.grid_size)?;
        let grid = CandidateGrid::new(config.grid_size)?;
        let state = match spec {
            MethodSpec::Empirical => MethodState::Empirical {
                history: History::new(),
            },
            MethodSpec::Parametric { prior, k_rho, k_nu } => {
                let posterior = BetaPosterior::from_prior_grid(prior, *k_rho, *k_nu)?;
                let cache = BetaNodeCache::new(&posterior, num::default_quadrature());
                MethodState::Parametric { posterior, cache }
            }
            MethodSpec::Mdp {
                prior,
                kappa,
                k_rho,
                k_nu,
            } => {
                let posterior = BetaPosterior::from_prior_grid(prior, *k_rho, *k_nu)?;
                let cache = BetaNodeCache::new(&posterior, num::default_quadrature());
                MethodState::Mdp {
                    posterior,
                    history: History::new(),
                    kappa: *kappa,
                    cache,
                }
            }
            MethodSpec::Etel { config: etel } => MethodState::Etel {
                history: History::new(),
                sweep: EtelSweep::new(*etel),
            },
            MethodSpec::Oracle { law } => {
                law.validate()?;
                MethodState::Oracle {
                    stakes: crate::oracle::oracle_lambdas_on_grid(law, &grid, config.c)?,
                }
            }
        };
        let grid_len = grid.len();
        Ok(CsStream {
            config,
            grid,
            ledger: WealthLedger::new(grid_len),
            state,
            stakes: vec![0.0; grid_len],
            solve_tol: STAKE_TOL,
        })
    }

    pub fn config(&self) -> &BettingConfig {
        &self.config
    }

    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    pub fn ledger(&self) -> &WealthLedger {
        &self.ledger
    }

    /// Stakes used by the most recent step.
    pub fn last_stakes(&self) -> &[f64] {
        &self.stakes
    }

    /// The forecast that will price the next observation, if the method has
    /// one (`None` for the oracle and for histories too short to forecast).
    pub fn current_predictive(&self) -> Result<Option<PredictiveDistribution>> {
        match &self.state {
            MethodState::Empirical { history } => Ok(empirical_predictive(history)),
            MethodState::Parametric { posterior, .. } => Ok(Some(posterior.predictive())),
            MethodState::Mdp {
                posterior,
                history,
                kappa,
                ..
            } => mdp_predictive(&posterior.predictive(), history, *kappa),
            MethodState::Etel { history, sweep } => etel_predictive(history, sweep.config()),
            MethodState::Oracle { .. } => Ok(None),
        }
    }

    /// The forecast as the atom list the stake solver integrates against
    /// (beta components projected onto the quadrature nodes). `None` when
    /// there is no forecast.
    pub fn current_forecast_atoms(&mut self) -> Result<Option<Vec<Atom>>> {
        let quad = num::default_quadrature();
        match &mut self.state {
            MethodState::Empirical { history } => {
                Ok(empirical_predictive(history).map(|p| p.solver_atoms(quad)))
            }
            MethodState::Parametric { posterior, cache } => {
                let mut atoms = Vec::with_capacity(cache.nodes);
                cache.collapse_into(posterior, quad, 1.0, &mut atoms);
                Ok(Some(atoms))
            }
            MethodState::Mdp {
                posterior,
                history,
                kappa,
                cache,
            } => {
                if *kappa == 0.0 {
                    return Ok(empirical_predictive(history).map(|p| p.solver_atoms(quad)));
                }
                let m = history.len() as f64;
                if history.is_empty() {
                    let mut atoms = Vec::with_capacity(cache.nodes);
                    cache.collapse_into(posterior, quad, 1.0, &mut atoms);
                    return Ok(Some(atoms));
                }
                let scale = 1.0 / (*kappa + m);
                let mut atoms: Vec<Atom> = history
                    .unique_counts()
                    .iter()
                    .map(|&(x, cnt)| Atom {
                        x,
                        w: cnt as f64 * scale,
                    })
                    .collect();
                cache.collapse_into(posterior, quad, *kappa * scale, &mut atoms);
                Ok(Some(atoms))
            }
            MethodState::Etel { history, sweep } => {
                let pred = sweep.predictive(history)?;
                Ok(pred.map(|p| p.solver_atoms(quad)))
            }
            MethodState::Oracle { .. } => Ok(None),
        }
    }

    fn compute_stakes(&mut self) -> Result<()> {
        if let MethodState::Oracle { stakes } = &self.state {
            self.stakes.copy_from_slice(stakes);
            return Ok(());
        }
        match self.current_forecast_atoms()? {
            None => self.stakes.fill(0.0),
            Some(atoms) => {
                for (i, &mu) in self.grid.points().iter().enumerate() {
                    let warm = self.stakes[i];
                    self.stakes[i] =
                        solve_lambda_atoms(&atoms, mu, self.config.c, self.solve_tol, Some(warm))?
                            .lambda;
                }
            }
        }
        Ok(())
    }

    /// Processes one observation: forecast, stake, wealth update, interval
    /// inversion, state absorption.
    pub fn step(&mut self, x: f64) -> Result<StepRecord> {
        self.compute_stakes()?;
        let step = process_observation(&mut self.ledger, x, &self.stakes, &self.grid, &self.config)?;
        match &mut self.state {
            MethodState::Empirical { history } => history.push(x)?,
            MethodState::Parametric { posterior, .. } => posterior.update(x),
            MethodState::Mdp {
                posterior, history, ..
            } => {
                posterior.update(x);
                history.push(x)?;
            }
            MethodState::Etel { history, .. } => history.push(x)?,
            MethodState::Oracle { .. } => {}
        }
        Ok(StepRecord {
            n: self.ledger.n(),
            x,
            raw: step.raw,
            running: step.running,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictives::BetaParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_config() -> BettingConfig {
        BettingConfig::new(0.1, 0.95, 20).unwrap()
    }

    #[test]
    fn empirical_stream_is_flat_until_two_observations() {
        let mut s = CsStream::new(&MethodSpec::Empirical, small_config()).unwrap();
        let r1 = s.step(0.3).unwrap();
        assert_eq!(r1.running, ConfidenceInterval::new(0.0, 1.0));
        assert!(s.last_stakes().iter().all(|&l| l == 0.0));
        let r2 = s.step(0.7).unwrap();
        assert_eq!(r2.running, ConfidenceInterval::new(0.0, 1.0));
        // from the third step on the forecast exists and stakes move
        s.step(0.5).unwrap();
        assert!(s.last_stakes().iter().any(|&l| l != 0.0));
    }

    #[test]
    fn stream_intervals_are_nested() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let law = TrueLaw::Beta { a: 2.0, b: 2.0 };
        let mut s = CsStream::new(&MethodSpec::Empirical, small_config()).unwrap();
        let mut prev = ConfidenceInterval::FULL;
        for x in law.sample_stream(&mut rng, 150) {
            let r = s.step(x).unwrap();
            assert!(r.running.lower >= prev.lower - 1e-15);
            assert!(r.running.upper <= prev.upper + 1e-15);
            prev = r.running;
        }
        assert!(prev.contains(0.5), "final interval {prev:?}");
    }

    #[test]
    fn mdp_stream_runs_with_prior() {
        let prior = BetaPriorSpec {
            rho: BetaParams { a: 1.0, b: 1.0 },
            nu: crate::predictives::GammaParams {
                shape: 1.5,
                rate: 1.0,
            },
        };
        let mut s = CsStream::new(
            &MethodSpec::Mdp {
                prior,
                kappa: 50.0,
                k_rho: 10,
                k_nu: 5,
            },
            small_config(),
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let law = TrueLaw::Bernoulli(0.4);
        for x in law.sample_stream(&mut rng, 60) {
            s.step(x).unwrap();
        }
        assert!(s.ledger().running_interval().contains(0.4));
    }

    #[test]
    fn etel_stream_handles_degenerate_prefix() {
        let config = EtelConfig::betel(50, BetaParams { a: 1.0, b: 1.0 }).unwrap();
        let mut s = CsStream::new(&MethodSpec::Etel { config }, small_config()).unwrap();
        // constant prefix keeps the betel forecast degenerate -> zero stakes
        for _ in 0..3 {
            let r = s.step(0.5).unwrap();
            assert_eq!(r.running, ConfidenceInterval::new(0.0, 1.0));
        }
        s.step(0.9).unwrap();
        s.step(0.1).unwrap();
        assert!(s.ledger().n() == 5);
    }

    #[test]
    fn rejects_out_of_range_observation() {
        let mut s = CsStream::new(&MethodSpec::Empirical, small_config()).unwrap();
        assert!(s.step(1.2).is_err());
        assert_eq!(s.ledger().n(), 0);
    }
}
