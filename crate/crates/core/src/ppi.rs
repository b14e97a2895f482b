//! Prediction-powered inference for a bounded mean.
//!
//! The target mean decomposes as E[Y] = E[f(X)] + E[Y - f(X)]. The first
//! term is fixed at the plug-in average over a large unlabeled pool; the
//! residuals Y - f(X), declared to lie in [ell, u], are rescaled to [0, 1]
//! and fed to an ordinary bounded-mean confidence sequence. The reported
//! interval is the affine image of the Z-scale interval shifted by the
//! plug-in mean, so coverage of the target is the same event as coverage of
//! the rescaled residual mean and the time-uniform guarantee transfers
//! unchanged.

use crate::driver::{CsStream, MethodSpec, StepRecord};
use crate::engine::{BettingConfig, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::predictives::BetaParams;
use serde::Serialize;

/// Residual bounds (ell, u) with ell < u, declared up front; inferring them
/// from data would break validity if a later residual escaped.
pub type ResidualBounds = (f64, f64);

/// Labeled pairs, unlabeled predictions and declared residual bounds.
#[derive(Debug, Clone, Default)]
pub struct PpiDataset {
    pub unlabeled_predictions: Vec<f64>,
    /// (y, f(x)) in arrival order.
    pub labeled_pairs: Vec<(f64, f64)>,
    pub residual_bounds: ResidualBounds,
}

impl PpiDataset {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.residual_bounds;
        if !(lo < hi) {
            return Err(Error::InvalidParameter {
                name: "residual_bounds",
                value: hi - lo,
                constraint: "lower bound must be below upper bound",
            });
        }
        for (row, (y, fx)) in self.labeled_pairs.iter().enumerate() {
            let r = y - fx;
            if !(lo..=hi).contains(&r) {
                return Err(Error::ResidualOutOfBounds {
                    value: r,
                    row,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Arithmetic mean of the unlabeled predictions.
pub fn plugin_mean(ds: &PpiDataset) -> Result<f64> {
    if ds.unlabeled_predictions.is_empty() {
        return Err(Error::InvalidParameter {
            name: "unlabeled_predictions",
            value: 0.0,
            constraint: "pool must be nonempty",
        });
    }
    Ok(ds.unlabeled_predictions.iter().sum::<f64>() / ds.unlabeled_predictions.len() as f64)
}

/// Affine map of a residual onto [0, 1].
pub fn rescale_residual(r: f64, bounds: ResidualBounds, row: usize) -> Result<f64> {
    let (lo, hi) = bounds;
    if !(lo..=hi).contains(&r) {
        return Err(Error::ResidualOutOfBounds {
            value: r,
            row,
            lo,
            hi,
        });
    }
    Ok((r - lo) / (hi - lo))
}

/// Prior concentration xi(n0) = ((n0 (u - ell)^2) / 4 - 1) / 2: the
/// Beta(xi, xi) prior on the rescaled mean has variance 1/(4(2 xi + 1)),
/// which equals 1/n0 back on the residual scale.
pub fn prior_concentration(n0: u64, bounds: ResidualBounds) -> Result<f64> {
    let (lo, hi) = bounds;
    let span2 = (hi - lo) * (hi - lo);
    let target = n0 as f64 * span2 / 4.0;
    if !(target > 1.0) {
        return Err(Error::InvalidParameter {
            name: "n0",
            value: n0 as f64,
            constraint: "n0 (u - ell)^2 / 4 must exceed 1",
        });
    }
    Ok(0.5 * (target - 1.0))
}

/// Beta prior on the Z scale matching a zero-centered residual prior with
/// variance 1/n0. Symmetric bounds give Beta(xi, xi); asymmetric bounds use
/// the same variance target with mean (0 - ell)/(u - ell).
pub fn zscale_prior(n0: u64, bounds: ResidualBounds) -> Result<BetaParams> {
    let (lo, hi) = bounds;
    if lo + hi == 0.0 {
        let xi = prior_concentration(n0, bounds)?;
        return Ok(BetaParams { a: xi, b: xi });
    }
    let m = (0.0 - lo) / (hi - lo);
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParameter {
            name: "residual_bounds",
            value: m,
            constraint: "zero must lie strictly inside the bounds",
        });
    }
    let var_z = 1.0 / (n0 as f64 * (hi - lo) * (hi - lo));
    let s = m * (1.0 - m) / var_z - 1.0;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "n0",
            value: n0 as f64,
            constraint: "prior variance target unattainable on [0, 1]",
        });
    }
    Ok(BetaParams {
        a: m * s,
        b: (1.0 - m) * s,
    })
}

/// Reference labeled size for prior elicitation, confidence level, and the
/// confidence-sequence method driving the rectifier stream.
#[derive(Debug, Clone, Copy)]
pub struct PpiConfig {
    pub n0: u64,
    pub alpha: f64,
    pub method: crate::sim::MethodName,
}

impl PpiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::InvalidParameter {
                name: "n0",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                constraint: "must lie in (0, 1)",
            });
        }
        Ok(())
    }
}

/// Sequential PPI state: a bounded-mean stream on the Z scale plus the fixed
/// affine map back to the target scale.
#[derive(Debug, Clone)]
pub struct PpiStream {
    inner: CsStream,
    bounds: ResidualBounds,
    shift: f64,
    row: usize,
}

/// Z-scale and target-scale intervals after one labeled pair.
#[derive(Debug, Clone, Copy)]
pub struct PpiStepRecord {
    pub n: u64,
    pub z: f64,
    pub z_step: StepRecord,
    /// Running interval on the target scale.
    pub theta: ConfidenceInterval,
    /// Raw per-step interval on the target scale.
    pub theta_raw: ConfidenceInterval,
}

impl PpiStream {
    /// `shift` is the plug-in mean (0 in classical mode).
    pub fn new(
        spec: &MethodSpec,
        config: BettingConfig,
        bounds: ResidualBounds,
        shift: f64,
    ) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::InvalidParameter {
                name: "residual_bounds",
                value: bounds.1 - bounds.0,
                constraint: "lower bound must be below upper bound",
            });
        }
        Ok(PpiStream {
            inner: CsStream::new(spec, config)?,
            bounds,
            shift,
            row: 0,
        })
    }

    /// Classical mode: labels are already in [0, 1] and feed the stream
    /// directly; the target interval equals the Z interval.
    pub fn classical(spec: &MethodSpec, config: BettingConfig) -> Result<Self> {
        Self::new(spec, config, (0.0, 1.0), 0.0)
    }

    fn to_theta(&self, iv: ConfidenceInterval) -> ConfidenceInterval {
        if iv.empty {
            return ConfidenceInterval::EMPTY;
        }
        let (lo, hi) = self.bounds;
        let span = hi - lo;
        ConfidenceInterval {
            lower: self.shift + lo + span * iv.lower,
            upper: self.shift + lo + span * iv.upper,
            empty: false,
        }
    }

    /// Feeds one labeled pair (y, f(x)).
    pub fn step(&mut self, y: f64, fx: f64) -> Result<PpiStepRecord> {
        let z = rescale_residual(y - fx, self.bounds, self.row)?;
        let z_step = self.inner.step(z)?;
        self.row += 1;
        Ok(PpiStepRecord {
            n: z_step.n,
            z,
            z_step,
            theta: self.to_theta(z_step.running),
            theta_raw: self.to_theta(z_step.raw),
        })
    }

    pub fn inner(&self) -> &CsStream {
        &self.inner
    }
}

/// First n at which the target-scale running interval lies strictly above
/// `null_threshold` (an empty interval also rejects: the truth is certainly
/// not covered, an event of probability at most alpha under the null).
/// `None` when the stream never rejects.
pub fn sequential_test_stop_time(
    stream: &mut PpiStream,
    pairs: &[(f64, f64)],
    null_threshold: f64,
) -> Result<Option<usize>> {
    for (i, &(y, fx)) in pairs.iter().enumerate() {
        let rec = stream.step(y, fx)?;
        if rec.theta.empty || rec.theta.lower > null_threshold {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}

/// Stop-time summary written next to the streaming CSV.
#[derive(Debug, Clone, Serialize)]
pub struct StopSummary {
    pub method: String,
    pub alpha: f64,
    pub stop_n: Option<usize>,
    pub seed: Option<u64>,
}

pub fn stop_summary_json(summary: &StopSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

/// Labeled CSV: header `y,f_x`, one pair per row.
pub fn parse_labeled_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let y = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                context: "labeled csv".into(),
                line: idx + 1,
            })?;
        let fx = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                context: "labeled csv".into(),
                line: idx + 1,
            })?;
        out.push((y, fx));
    }
    Ok(out)
}

/// Unlabeled CSV: header `f_x`, one prediction per row.
pub fn parse_unlabeled_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let v: f64 = line
            .split(',')
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                context: "unlabeled csv".into(),
                line: idx + 1,
            })?;
        out.push(v);
    }
    Ok(out)
}
