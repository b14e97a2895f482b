//! Predictive distributions on [0, 1] and the one-step log-growth stake.
//!
//! For a forecast Q of the next observation and a candidate mean mu, the
//! stake is the maximizer over the betting interval of
//!
//! ```text
//! E_Q[ log(1 + lambda (X - mu)) ].
//! ```
//!
//! The objective is concave with derivative E_Q[(X - mu) / (1 + lambda (X - mu))],
//! strictly decreasing in lambda for any non-degenerate forecast, so the
//! maximizer is either an endpoint of the interval (when the score does not
//! change sign) or the unique interior root of the score.

use crate::error::{Error, Result};
use crate::num::{self, GaussLegendre};

/// Point mass on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

/// Weighted Beta(a, b) mixture component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaComponent {
    pub a: f64,
    pub b: f64,
    pub w: f64,
}

/// Finite mixture of point masses and beta components on [0, 1]. The sole
/// currency between the predictive constructions and the stake solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    atoms: Vec<Atom>,
    betas: Vec<BetaComponent>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl PredictiveDistribution {
    pub fn new(atoms: Vec<Atom>, betas: Vec<BetaComponent>) -> Result<Self> {
        if atoms.is_empty() && betas.is_empty() {
            return Err(Error::EmptyPredictive);
        }
        let mut total = 0.0;
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.x) {
                return Err(Error::InvalidParameter {
                    name: "atom location",
                    value: a.x,
                    constraint: "must lie in [0, 1]",
                });
            }
            if !(a.w > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "atom weight",
                    value: a.w,
                    constraint: "must be positive",
                });
            }
            total += a.w;
        }
        for b in &betas {
            if !(b.a > 0.0 && b.b > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "beta shape",
                    value: b.a.min(b.b),
                    constraint: "must be positive",
                });
            }
            if !(b.w > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "beta weight",
                    value: b.w,
                    constraint: "must be positive",
                });
            }
            total += b.w;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter {
                name: "total weight",
                value: total,
                constraint: "must sum to 1 within 1e-12",
            });
        }
        Ok(PredictiveDistribution { atoms, betas })
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, Vec::new())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn betas(&self) -> &[BetaComponent] {
        &self.betas
    }

    pub fn mean(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|a| a.w * a.x).sum();
        let beta_part: f64 = self
            .betas
            .iter()
            .map(|b| b.w * b.a / (b.a + b.b))
            .sum();
        atom_part + beta_part
    }

    /// True when all mass sits exactly at `mu`; the stake is 0 by convention.
    pub fn is_degenerate_at(&self, mu: f64) -> bool {
        self.betas.is_empty() && self.atoms.iter().all(|a| a.x == mu)
    }

    /// Atom view used by all expectations: point masses pass through, beta
    /// components are projected onto the quadrature nodes. Components with
    /// negligible weight are skipped; the projection preserves every
    /// expectation computed by this module up to quadrature accuracy.
    pub fn solver_atoms(&self, quad: &GaussLegendre) -> Vec<Atom> {
        if self.betas.is_empty() {
            return self.atoms.clone();
        }
        let mut node_w = vec![0.0; quad.len()];
        for b in &self.betas {
            if b.w < num::NEGLIGIBLE_WEIGHT {
                continue;
            }
            quad.accumulate_beta_weights(b.a, b.b, b.w, &mut node_w);
        }
        let mut out = Vec::with_capacity(self.atoms.len() + quad.len());
        out.extend_from_slice(&self.atoms);
        out.extend(
            quad.x
                .iter()
                .zip(node_w.iter())
                .filter(|(_, w)| **w > 0.0)
                .map(|(&x, &w)| Atom { x, w }),
        );
        out
    }
}

/// Solved stake for one candidate mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub at_boundary: bool,
    pub foc_residual: f64,
}

impl LambdaSolution {
    pub const ZERO: LambdaSolution = LambdaSolution {
        lambda: 0.0,
        at_boundary: false,
        foc_residual: 0.0,
    };
}

fn check_factor_positivity(lambda: f64, mu: f64) -> Result<()> {
    // Factors over x in [0, 1] are minimized at x = 0 (lambda > 0) or
    // x = 1 (lambda < 0).
    let at_zero = 1.0 - lambda * mu;
    let at_one = 1.0 + lambda * (1.0 - mu);
    if at_zero <= 0.0 || at_one <= 0.0 {
        return Err(Error::NonpositiveFactor {
            factor: at_zero.min(at_one),
            lambda,
            x: if at_zero <= at_one { 0.0 } else { 1.0 },
            mu,
        });
    }
    Ok(())
}

fn score_atoms(atoms: &[Atom], lambda: f64, mu: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut ds = 0.0;
    for a in atoms {
        let d = a.x - mu;
        let q = d / (1.0 + lambda * d);
        s += a.w * q;
        ds -= a.w * q * q;
    }
    (s, ds)
}

/// E[(X - mu) / (1 + lambda (X - mu))] under `pred`: the derivative of the
/// expected log-growth in lambda. Atoms are summed exactly, beta components
/// via fixed-node quadrature.
pub fn expected_score(pred: &PredictiveDistribution, lambda: f64, mu: f64) -> Result<f64> {
    check_factor_positivity(lambda, mu)?;
    let atoms = pred.solver_atoms(num::default_quadrature());
    Ok(score_atoms(&atoms, lambda, mu).0)
}

/// E[log(1 + lambda (X - mu))] under `pred`.
pub fn expected_loggrowth(pred: &PredictiveDistribution, lambda: f64, mu: f64) -> Result<f64> {
    check_factor_positivity(lambda, mu)?;
    let atoms = pred.solver_atoms(num::default_quadrature());
    Ok(atoms
        .iter()
        .map(|a| a.w * (1.0 + lambda * (a.x - mu)).ln())
        .sum())
}

/// Maximizes the expected log-growth over the betting interval for `mu`.
///
/// Endpoint rule: if the score at the left endpoint is already nonpositive
/// the objective is decreasing on the whole interval (left endpoint wins);
/// symmetrically for the right endpoint. Otherwise the unique interior root
/// of the score is located to |residual| <= tol. Degenerate forecasts (all
/// mass at mu) return lambda = 0 without error.
pub fn solve_lambda(
    pred: &PredictiveDistribution,
    mu: f64,
    c: f64,
    tol: f64,
) -> Result<LambdaSolution> {
    if pred.atoms.is_empty() && pred.betas.is_empty() {
        return Err(Error::EmptyPredictive);
    }
    if pred.is_degenerate_at(mu) {
        return Ok(LambdaSolution::ZERO);
    }
    let atoms = pred.solver_atoms(num::default_quadrature());
    solve_lambda_atoms(&atoms, mu, c, tol, None)
}

/// Stake solver on a pre-atomized forecast; `warm` seeds the Newton
/// iteration (streams pass the previous step's stake).
pub fn solve_lambda_atoms(
    atoms: &[Atom],
    mu: f64,
    c: f64,
    tol: f64,
    warm: Option<f64>,
) -> Result<LambdaSolution> {
    if atoms.is_empty() {
        return Err(Error::EmptyPredictive);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            constraint: "must be positive",
        });
    }
    let (lo, hi) = crate::engine::betting_interval(mu, c)?;
    if atoms.iter().all(|a| a.x == mu) {
        return Ok(LambdaSolution::ZERO);
    }
    // Evaluate just inside the endpoints; the reported boundary stake is the
    // exact endpoint.
    let margin = 1e-12 * (hi - lo);
    let lo_eval = lo + margin;
    let hi_eval = hi - margin;
    let (s_lo, _) = score_atoms(atoms, lo_eval, mu);
    if s_lo <= 0.0 {
        return Ok(LambdaSolution {
            lambda: lo,
            at_boundary: true,
            foc_residual: s_lo,
        });
    }
    let (s_hi, _) = score_atoms(atoms, hi_eval, mu);
    if s_hi >= 0.0 {
        return Ok(LambdaSolution {
            lambda: hi,
            at_boundary: true,
            foc_residual: s_hi,
        });
    }
    // The score is strictly decreasing; negate so the solver sees an
    // increasing function.
    let guess = warm.unwrap_or(0.0).clamp(lo_eval, hi_eval);
    let (lambda, neg_res) = num::newton_bisect_root(
        |l| {
            let (s, ds) = score_atoms(atoms, l, mu);
            (-s, -ds)
        },
        lo_eval,
        hi_eval,
        tol,
        guess,
    );
    Ok(LambdaSolution {
        lambda,
        at_boundary: false,
        foc_residual: -neg_res,
    })
}
