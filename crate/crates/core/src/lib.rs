//! Anytime-valid confidence sequences for bounded means via betting martingales.
//!
//! For i.i.d. observations in [0, 1] with unknown mean, each candidate mean mu
//! is tested with a nonnegative wealth process
//!
//! ```text
//! W_n(mu) = prod_{i<=n} (1 + lambda_i(mu) * (X_i - mu)),      W_0 = 1,
//! ```
//!
//! where the stake `lambda_i(mu)` is predictable and confined to the interval
//! `[-c/(1-mu), c/mu]` so every factor stays positive. Under the null mean the
//! process is a martingale with initial value one, so by Ville's inequality the
//! set `{mu : W_n(mu) <= 1/alpha}` is a `1 - alpha` confidence sequence,
//! uniformly over time and under optional stopping.
//!
//! Validity never depends on how the stakes are chosen; efficiency does. The
//! stake at each step maximizes expected log-growth under a forecast of the
//! next observation. Five forecast constructions are provided in
//! [`predictives`]: the empirical distribution of past observations, a
//! beta-working-model posterior predictive, a mixture that interpolates
//! between the two, and exponentially-tilted empirical-likelihood
//! pseudo-posteriors (plain and endpoint-regularized). Known-distribution
//! baselines and diagnostics (oracle stakes, Wasserstein-1 distance) live in
//! [`oracle`].
//!
//! On top of the single-stream engine sit a scenario simulation harness
//! ([`sim`]), a LUCB best-arm-identification driver ([`lucb`]), and a
//! prediction-powered-inference wrapper for rectifier means ([`ppi`]).

// Validation uses `!(x > 0.0)`-style comparisons so NaN inputs fail closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod betting;
pub mod driver;
pub mod engine;
pub mod error;
pub mod lucb;
pub mod num;
pub mod oracle;
pub mod ppi;
pub mod predictives;
pub mod sim;

pub use betting::{Atom, BetaComponent, LambdaSolution, PredictiveDistribution};
pub use driver::{CsStream, MethodSpec, StepRecord};
pub use engine::{BettingConfig, CandidateGrid, ConfidenceInterval, WealthLedger};
pub use error::{Error, ErrorClass, Result};
pub use lucb::{Arm, LucbConfig, LucbOutcome, LucbState, RewardSource};
pub use oracle::TrueLaw;
pub use ppi::{PpiConfig, PpiDataset, PpiStream};
pub use predictives::{
    BetaParams, BetaPosterior, BetaPriorSpec, EtelConfig, GammaParams, History, TiltSolution,
};
pub use sim::{MethodName, PriorRegime, RunResult, Scenario};
