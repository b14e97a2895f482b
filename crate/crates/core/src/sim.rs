//! Declarative scenario runner: coverage, width and growth diagnostics over
//! repeated synthetic streams.
//!
//! A scenario fixes a data law, a method, a prior regime, a horizon, a
//! repetition count and a seed. Each repetition draws an independent stream
//! (per-repetition seeds are a fixed splitmix of the scenario seed), runs the
//! chosen method and the oracle on the same stream, and records per-step
//! width, width relative to the oracle, cumulative miscoverage ("truth ever
//! missed up to n", computed on the running intersection), and the per-sample
//! log-wealth rate at selected candidate means.

use crate::driver::{CsStream, MethodSpec, DEFAULT_K_NU, DEFAULT_K_RHO};
use crate::engine::BettingConfig;
use crate::error::{Error, Result};
use crate::num::split_seed;
use crate::oracle::TrueLaw;
use crate::predictives::{BetaParams, BetaPriorSpec, EtelConfig, GammaParams};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::io::Write;

/// Method selector for scenarios and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Empirical,
    Parametric,
    Mdp,
    Betel,
    Retel,
    Oracle,
}

impl MethodName {
    pub const ALL: [MethodName; 6] = [
        MethodName::Empirical,
        MethodName::Parametric,
        MethodName::Mdp,
        MethodName::Betel,
        MethodName::Retel,
        MethodName::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Empirical => "empirical",
            MethodName::Parametric => "parametric",
            MethodName::Mdp => "mdp",
            MethodName::Betel => "betel",
            MethodName::Retel => "retel",
            MethodName::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<MethodName> {
        MethodName::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prior quality regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorRegime {
    Informative,
    NonInformative,
    Misspecified,
    Custom,
}

impl PriorRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            PriorRegime::Informative => "informative",
            PriorRegime::NonInformative => "noninformative",
            PriorRegime::Misspecified => "misspecified",
            PriorRegime::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<PriorRegime> {
        [
            PriorRegime::Informative,
            PriorRegime::NonInformative,
            PriorRegime::Misspecified,
            PriorRegime::Custom,
        ]
        .iter()
        .copied()
        .find(|r| r.as_str() == s)
    }
}

/// Hyperparameters produced by a preset: the beta-working-model priors and
/// the mean prior for the tilted-likelihood methods (always equal to the rho
/// prior in the presets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub rho: BetaParams,
    pub nu: GammaParams,
    pub mu: BetaParams,
}

impl PriorSpec {
    pub fn beta_prior(&self) -> BetaPriorSpec {
        BetaPriorSpec {
            rho: self.rho,
            nu: self.nu,
        }
    }
}

fn preset(rho: BetaParams, nu: GammaParams) -> PriorSpec {
    PriorSpec {
        rho,
        nu,
        mu: rho,
    }
}

const NONINFORMATIVE: PriorSpec = PriorSpec {
    rho: BetaParams { a: 1.0, b: 1.0 },
    nu: GammaParams {
        shape: 1.5,
        rate: 1.0,
    },
    mu: BetaParams { a: 1.0, b: 1.0 },
};

/// Prior hyperparameters for the synthetic experiment presets.
///
/// Bernoulli(p): informative rho ~ Beta(500p, 500(1-p)), nu ~ Gamma(1, 100);
/// misspecified swaps p for 0.5 (if p = 0.1) or 0.1 (if p = 0.5) with
/// nu ~ Gamma(7.5, 1). Beta(a, b) in {(0.5,0.5), (1,1), (10,30)}:
/// informative rho ~ Beta(200 m, 200(1-m)) with m the true mean and
/// case-specific nu; misspecified centers rho at 0.9. The beta mixture:
/// informative rho ~ Beta(500 m, 500(1-m)), nu ~ Gamma(2, 2); misspecified
/// centers rho at 0.1. The mean prior for betel/retel always equals the rho
/// prior. The non-informative preset is law-free.
pub fn preset_prior(law: &TrueLaw, regime: PriorRegime, method: MethodName) -> Result<PriorSpec> {
    let _ = method; // presets are shared across methods
    let unknown = || Error::UnknownPreset {
        law: format!("{law:?}"),
        regime: regime.as_str().to_string(),
    };
    match regime {
        PriorRegime::NonInformative => Ok(NONINFORMATIVE),
        PriorRegime::Custom => Err(unknown()),
        PriorRegime::Informative => match law {
            TrueLaw::Bernoulli(p) => Ok(preset(
                BetaParams {
                    a: 500.0 * p,
                    b: 500.0 * (1.0 - p),
                },
                GammaParams {
                    shape: 1.0,
                    rate: 100.0,
                },
            )),
            TrueLaw::Beta { a, b } => {
                let m = a / (a + b);
                let nu = beta_case_nu(*a, *b).ok_or_else(unknown)?;
                Ok(preset(
                    BetaParams {
                        a: 200.0 * m,
                        b: 200.0 * (1.0 - m),
                    },
                    nu,
                ))
            }
            TrueLaw::BetaMixture(_) => {
                let m = law.mean();
                Ok(preset(
                    BetaParams {
                        a: 500.0 * m,
                        b: 500.0 * (1.0 - m),
                    },
                    GammaParams {
                        shape: 2.0,
                        rate: 2.0,
                    },
                ))
            }
            TrueLaw::FiniteAtoms(_) => Err(unknown()),
        },
        PriorRegime::Misspecified => match law {
            TrueLaw::Bernoulli(p) => {
                let p_bad = if *p == 0.1 {
                    0.5
                } else if *p == 0.5 {
                    0.1
                } else {
                    return Err(unknown());
                };
                Ok(preset(
                    BetaParams {
                        a: 500.0 * p_bad,
                        b: 500.0 * (1.0 - p_bad),
                    },
                    GammaParams {
                        shape: 7.5,
                        rate: 1.0,
                    },
                ))
            }
            TrueLaw::Beta { a, b } => {
                let nu = beta_case_nu(*a, *b).ok_or_else(unknown)?;
                Ok(preset(
                    BetaParams {
                        a: 200.0 * 0.9,
                        b: 200.0 * 0.1,
                    },
                    nu,
                ))
            }
            TrueLaw::BetaMixture(_) => Ok(preset(
                BetaParams {
                    a: 200.0 * 0.1,
                    b: 200.0 * 0.9,
                },
                GammaParams {
                    shape: 2.0,
                    rate: 2.0,
                },
            )),
            TrueLaw::FiniteAtoms(_) => Err(unknown()),
        },
    }
}

/// Prior centered at an elicited mean estimate, as used for bandit arms:
/// rho ~ Beta(500 m, 500 (1 - m)), nu ~ Gamma(2, 2), mean prior equal to the
/// rho prior.
pub fn elicited_prior(mean: f64) -> Result<PriorSpec> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::InvalidParameter {
            name: "elicited mean",
            value: mean,
            constraint: "must lie in (0, 1)",
        });
    }
    Ok(preset(
        BetaParams {
            a: 500.0 * mean,
            b: 500.0 * (1.0 - mean),
        },
        GammaParams {
            shape: 2.0,
            rate: 2.0,
        },
    ))
}

fn beta_case_nu(a: f64, b: f64) -> Option<GammaParams> {
    if a == 0.5 && b == 0.5 {
        Some(GammaParams {
            shape: 7.5,
            rate: 1.0,
        })
    } else if a == 1.0 && b == 1.0 {
        Some(GammaParams {
            shape: 2.0,
            rate: 0.1,
        })
    } else if a == 10.0 && b == 30.0 {
        Some(GammaParams {
            shape: 2.0,
            rate: 1.0,
        })
    } else {
        None
    }
}

/// A declarative experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub law: TrueLaw,
    pub method: MethodName,
    pub regime: PriorRegime,
    /// Required when `regime` is `Custom`; overrides the preset otherwise
    /// when present.
    pub custom_prior: Option<PriorSpec>,
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub config: BettingConfig,
    /// Candidate means (snapped to the grid) whose log-wealth rate is
    /// tracked.
    pub tracked_mus: Vec<f64>,
    pub kappa: f64,
    pub etel_grid: usize,
    pub k_rho: usize,
    pub k_nu: usize,
}

impl Scenario {
    pub fn new(
        law: TrueLaw,
        method: MethodName,
        regime: PriorRegime,
        horizon: usize,
        repetitions: usize,
        seed: u64,
    ) -> Self {
        Scenario {
            law,
            method,
            regime,
            custom_prior: None,
            horizon,
            repetitions,
            seed,
            config: BettingConfig::default(),
            tracked_mus: Vec::new(),
            kappa: 50.0,
            etel_grid: 1000,
            k_rho: DEFAULT_K_RHO,
            k_nu: DEFAULT_K_NU,
        }
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        match (&self.custom_prior, self.regime) {
            (Some(p), _) => Ok(*p),
            (None, PriorRegime::Custom) => Err(Error::InvalidParameter {
                name: "custom_prior",
                value: 0.0,
                constraint: "custom regime requires explicit prior parameters",
            }),
            (None, regime) => preset_prior(&self.law, regime, self.method),
        }
    }

    /// Resolves the scenario into a runnable method specification.
    pub fn method_spec(&self) -> Result<MethodSpec> {
        Ok(match self.method {
            MethodName::Empirical => MethodSpec::Empirical,
            MethodName::Parametric => MethodSpec::Parametric {
                prior: self.prior()?.beta_prior(),
                k_rho: self.k_rho,
                k_nu: self.k_nu,
            },
            MethodName::Mdp => MethodSpec::Mdp {
                prior: self.prior()?.beta_prior(),
                kappa: self.kappa,
                k_rho: self.k_rho,
                k_nu: self.k_nu,
            },
            MethodName::Betel => MethodSpec::Etel {
                config: EtelConfig::betel(self.etel_grid, self.prior()?.mu)?,
            },
            MethodName::Retel => MethodSpec::Etel {
                config: EtelConfig::retel(self.etel_grid, self.prior()?.mu)?,
            },
            MethodName::Oracle => MethodSpec::Oracle {
                law: self.law.clone(),
            },
        })
    }
}

/// Per-step aggregates over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAggregate {
    pub n: usize,
    pub mean_width: f64,
    pub width_over_oracle: f64,
    pub cum_miscoverage: f64,
    pub mean_log_growth_rate: f64,
}

/// Aggregated scenario output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rows: Vec<StepAggregate>,
    pub seed: u64,
    pub repetitions: usize,
    /// Repetitions whose running interval was empty at some step.
    pub empty_flagged_reps: usize,
}

struct RepTrace {
    widths: Vec<f64>,
    oracle_widths: Vec<f64>,
    missed: Vec<bool>,
    growth: Vec<f64>,
    any_empty: bool,
}

fn run_repetition(scenario: &Scenario, spec: &MethodSpec, rep: usize) -> Result<RepTrace> {
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed(scenario.seed, rep as u64));
    let xs = scenario.law.sample_stream(&mut rng, scenario.horizon);
    let truth = scenario.law.mean();

    let mut method = CsStream::new(spec, scenario.config)?;
    let is_oracle = matches!(spec, MethodSpec::Oracle { .. });
    let mut oracle = if is_oracle {
        None
    } else {
        Some(CsStream::new(
            &MethodSpec::Oracle {
                law: scenario.law.clone(),
            },
            scenario.config,
        )?)
    };
    let tracked: Vec<usize> = scenario
        .tracked_mus
        .iter()
        .map(|&mu| method.grid().nearest_index(mu))
        .collect();

    let n = scenario.horizon;
    let mut trace = RepTrace {
        widths: Vec::with_capacity(n),
        oracle_widths: Vec::with_capacity(n),
        missed: Vec::with_capacity(n),
        growth: Vec::with_capacity(n),
        any_empty: false,
    };
    let mut missed = false;
    for (i, &x) in xs.iter().enumerate() {
        let rec = method.step(x)?;
        let o_rec = match oracle.as_mut() {
            Some(o) => o.step(x)?,
            None => rec,
        };
        if rec.running.empty {
            trace.any_empty = true;
        }
        if !rec.running.contains(truth) {
            missed = true;
        }
        trace.widths.push(rec.running.width());
        trace.oracle_widths.push(o_rec.running.width());
        trace.missed.push(missed);
        let rate = if tracked.is_empty() {
            0.0
        } else {
            let lw = method.ledger().log_wealth();
            tracked.iter().map(|&k| lw[k]).sum::<f64>()
                / (tracked.len() as f64 * (i as f64 + 1.0))
        };
        trace.growth.push(rate);
    }
    Ok(trace)
}

/// Runs all repetitions (in parallel) and aggregates per step. Aggregation
/// folds repetition traces in index order, so results are identical for any
/// thread count.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    if scenario.repetitions == 0 || scenario.horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "scenario",
            value: 0.0,
            constraint: "horizon and repetitions must be at least 1",
        });
    }
    scenario.law.validate()?;
    let spec = scenario.method_spec()?;
    let traces: Vec<Result<RepTrace>> = (0..scenario.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(scenario, &spec, rep))
        .collect();

    let n = scenario.horizon;
    let mut width_sum = vec![0.0; n];
    let mut oracle_sum = vec![0.0; n];
    let mut miss_sum = vec![0usize; n];
    let mut growth_sum = vec![0.0; n];
    let mut empty_reps = 0usize;
    for trace in traces {
        let t = trace?;
        if t.any_empty {
            empty_reps += 1;
        }
        for i in 0..n {
            width_sum[i] += t.widths[i];
            oracle_sum[i] += t.oracle_widths[i];
            miss_sum[i] += usize::from(t.missed[i]);
            growth_sum[i] += t.growth[i];
        }
    }
    let r = scenario.repetitions as f64;
    let rows = (0..n)
        .map(|i| {
            let mean_width = width_sum[i] / r;
            let mean_oracle = oracle_sum[i] / r;
            let width_over_oracle = if mean_oracle == 0.0 {
                if mean_width == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                mean_width / mean_oracle
            };
            StepAggregate {
                n: i + 1,
                mean_width,
                width_over_oracle,
                cum_miscoverage: miss_sum[i] as f64 / r,
                mean_log_growth_rate: growth_sum[i] / r,
            }
        })
        .collect();
    Ok(RunResult {
        rows,
        seed: scenario.seed,
        repetitions: scenario.repetitions,
        empty_flagged_reps: empty_reps,
    })
}

/// CSV rendering of a run result. The header comment records the seed and
/// the derivation rule for per-repetition seeds.
pub fn render_results_csv(result: &RunResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# seed={} repetitions={} rep_seed[k]=splitmix64(seed, k) empty_flagged_reps={}\n",
        result.seed, result.repetitions, result.empty_flagged_reps
    ));
    out.push_str("n,mean_width,width_over_oracle,cum_miscoverage,mean_log_growth_rate\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{},{:.15},{:.15},{:.15},{:.15}\n",
            row.n,
            row.mean_width,
            row.width_over_oracle,
            row.cum_miscoverage,
            row.mean_log_growth_rate
        ));
    }
    out
}

/// Writes the CSV to `path`.
pub fn export_results(result: &RunResult, path: &std::path::Path) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(render_results_csv(result).as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn preset_values_match_tables() {
        let p = preset_prior(
            &TrueLaw::Bernoulli(0.1),
            PriorRegime::Informative,
            MethodName::Mdp,
        )
        .unwrap();
        assert_eq!(p.rho, BetaParams { a: 50.0, b: 450.0 });
        assert_eq!(
            p.nu,
            GammaParams {
                shape: 1.0,
                rate: 100.0
            }
        );

        let p = preset_prior(
            &TrueLaw::Bernoulli(0.1),
            PriorRegime::Misspecified,
            MethodName::Mdp,
        )
        .unwrap();
        assert_eq!(p.rho, BetaParams { a: 250.0, b: 250.0 });
        assert_eq!(
            p.nu,
            GammaParams {
                shape: 7.5,
                rate: 1.0
            }
        );

        let p = preset_prior(
            &TrueLaw::Beta { a: 10.0, b: 30.0 },
            PriorRegime::Informative,
            MethodName::Betel,
        )
        .unwrap();
        assert_eq!(p.mu, BetaParams { a: 50.0, b: 150.0 });
    }

    #[test]
    fn elicited_prior_centers_on_mean() {
        let p = elicited_prior(0.8).unwrap();
        assert!((p.rho.a - 400.0).abs() < 1e-9);
        assert!((p.rho.b - 100.0).abs() < 1e-9);
        assert_eq!(p.mu, p.rho);
        assert_eq!(
            p.nu,
            GammaParams {
                shape: 2.0,
                rate: 2.0
            }
        );
        assert!(elicited_prior(0.0).is_err());
    }

    #[test]
    fn preset_rejects_unknown_combinations() {
        assert!(preset_prior(
            &TrueLaw::Bernoulli(0.3),
            PriorRegime::Misspecified,
            MethodName::Mdp,
        )
        .is_err());
        assert!(preset_prior(
            &TrueLaw::Beta { a: 3.0, b: 4.0 },
            PriorRegime::Informative,
            MethodName::Mdp,
        )
        .is_err());
        // non-informative works for every law
        assert!(preset_prior(
            &TrueLaw::Beta { a: 3.0, b: 4.0 },
            PriorRegime::NonInformative,
            MethodName::Mdp,
        )
        .is_ok());
    }

    fn quick_scenario(method: MethodName) -> Scenario {
        let mut s = Scenario::new(
            TrueLaw::Bernoulli(0.5),
            method,
            PriorRegime::NonInformative,
            40,
            20,
            1234,
        );
        s.config = BettingConfig::new(0.1, 0.95, 20).unwrap();
        s.etel_grid = 100;
        s.k_rho = 10;
        s.k_nu = 5;
        s
    }

    #[test]
    fn oracle_width_ratio_is_one() {
        let result = run_scenario(&quick_scenario(MethodName::Oracle)).unwrap();
        for row in &result.rows {
            assert_eq!(row.width_over_oracle, 1.0);
        }
    }

    #[test]
    fn miscoverage_is_nondecreasing_and_results_reproducible() {
        let scenario = quick_scenario(MethodName::Empirical);
        let a = run_scenario(&scenario).unwrap();
        let mut prev = 0.0;
        for row in &a.rows {
            assert!(row.cum_miscoverage >= prev);
            prev = row.cum_miscoverage;
        }
        let b = run_scenario(&scenario).unwrap();
        assert_eq!(render_results_csv(&a), render_results_csv(&b));
    }

    #[test]
    fn grapa_reduction_identical_runs() {
        let emp = quick_scenario(MethodName::Empirical);
        let mut mdp = quick_scenario(MethodName::Mdp);
        mdp.kappa = 0.0;
        let a = run_scenario(&emp).unwrap();
        let b = run_scenario(&mdp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let result = run_scenario(&quick_scenario(MethodName::Empirical)).unwrap();
        let text = render_results_csv(&result);
        let mut rows = 0;
        for line in text.lines().skip(2) {
            let fields: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|f| f.parse().unwrap())
                .collect();
            let row = &result.rows[rows];
            for (got, want) in fields.iter().zip([
                row.mean_width,
                row.width_over_oracle,
                row.cum_miscoverage,
                row.mean_log_growth_rate,
            ]) {
                let tol = 1e-12 * want.abs().max(1e-3);
                assert!((got - want).abs() <= tol, "{got} vs {want}");
            }
            rows += 1;
        }
        assert_eq!(rows, result.rows.len());
    }

    #[test]
    fn empty_result_renders_header_only() {
        let result = RunResult {
            rows: vec![],
            seed: 3,
            repetitions: 0,
            empty_flagged_reps: 0,
        };
        let text = render_results_csv(&result);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with('#'));
        assert!(lines[1].starts_with("n,mean_width"));
    }

    #[test]
    fn martingale_mean_is_one_under_the_null() {
        // Constant stake at the true mean: E[W_n] = 1. Monte-Carlo check of
        // the martingale property that underpins validity.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        let (p, mu, lambda, steps) = (0.3, 0.3, 0.5, 10);
        let reps = 20_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let mut log_w = 0.0;
            for _ in 0..steps {
                let x = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                log_w = crate::engine::wealth_step(log_w, lambda, x, mu).unwrap();
            }
            sum += log_w.exp();
        }
        let mean = sum / reps as f64;
        assert!((mean - 1.0).abs() < 0.02, "E[W_n] = {mean}");
    }
}
