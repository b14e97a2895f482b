//! Grid-based wealth-process engine.
//!
//! Maintains log W_n(mu) over a grid of candidate means, inverts the 1/alpha
//! threshold into an interval, and keeps the running intersection of the
//! per-step intervals. All wealth accumulation is done in the log domain;
//! raw wealth grows exponentially and is never stored.

use crate::error::{Error, Result};

/// Confidence level, truncation parameter and inversion grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BettingConfig {
    pub alpha: f64,
    pub c: f64,
    pub grid_size: usize,
}

impl BettingConfig {
    pub fn new(alpha: f64, c: f64, grid_size: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "must lie in (0, 1)",
            });
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c,
                constraint: "must lie in (0, 1)",
            });
        }
        if grid_size < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_size",
                value: grid_size as f64,
                constraint: "must be at least 2",
            });
        }
        Ok(BettingConfig {
            alpha,
            c,
            grid_size,
        })
    }

    /// Rejection threshold on the log-wealth scale: log(1/alpha).
    pub fn log_threshold(&self) -> f64 {
        -self.alpha.ln()
    }
}

impl Default for BettingConfig {
    fn default() -> Self {
        BettingConfig {
            alpha: 0.1,
            c: 0.95,
            grid_size: 500,
        }
    }
}

/// Equally spaced candidate means {1/G, ..., (G-1)/G}. The endpoints 0 and 1
/// are never candidates; clipping of the reported interval supplies them.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    points: Vec<f64>,
    step: f64,
}

impl CandidateGrid {
    pub fn new(grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_size",
                value: grid_size as f64,
                constraint: "must be at least 2",
            });
        }
        let g = grid_size as f64;
        let points = (1..grid_size).map(|k| k as f64 / g).collect();
        Ok(CandidateGrid {
            points,
            step: 1.0 / g,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point closest to `mu`.
    pub fn nearest_index(&self, mu: f64) -> usize {
        let g = 1.0 / self.step;
        let k = (mu * g).round() as i64;
        (k.clamp(1, self.points.len() as i64) - 1) as usize
    }
}

/// Closed interval in [0, 1], possibly flagged empty. An empty interval is
/// stored canonically as (1, 0) so equal states compare bitwise equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl ConfidenceInterval {
    pub const FULL: ConfidenceInterval = ConfidenceInterval {
        lower: 0.0,
        upper: 1.0,
        empty: false,
    };

    pub const EMPTY: ConfidenceInterval = ConfidenceInterval {
        lower: 1.0,
        upper: 0.0,
        empty: true,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        if lower > upper {
            ConfidenceInterval::EMPTY
        } else {
            ConfidenceInterval {
                lower,
                upper,
                empty: false,
            }
        }
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.upper - self.lower
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && self.lower <= x && x <= self.upper
    }

    pub fn intersect(&self, other: &ConfidenceInterval) -> ConfidenceInterval {
        if self.empty || other.empty {
            return ConfidenceInterval::EMPTY;
        }
        ConfidenceInterval::new(self.lower.max(other.lower), self.upper.min(other.upper))
    }
}

/// Per-candidate-mean log-wealth state plus the current intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthLedger {
    log_wealth: Vec<f64>,
    n: u64,
    last_raw: ConfidenceInterval,
    running: ConfidenceInterval,
}

impl WealthLedger {
    /// Fresh ledger with W_0 = 1 at every grid point.
    pub fn new(grid_len: usize) -> Self {
        WealthLedger {
            log_wealth: vec![0.0; grid_len],
            n: 0,
            last_raw: ConfidenceInterval::FULL,
            running: ConfidenceInterval::FULL,
        }
    }

    pub fn log_wealth(&self) -> &[f64] {
        &self.log_wealth
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn last_raw_interval(&self) -> ConfidenceInterval {
        self.last_raw
    }

    pub fn running_interval(&self) -> ConfidenceInterval {
        self.running
    }
}

/// Feasible stake interval [-c/(1-mu), c/mu] for candidate mean `mu`: every
/// one-step factor 1 + lambda (x - mu) with x in [0, 1] stays >= 1 - c.
pub fn betting_interval(mu: f64, c: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: mu,
            constraint: "must lie in (0, 1)",
        });
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter {
            name: "c",
            value: c,
            constraint: "must lie in (0, 1)",
        });
    }
    Ok((-c / (1.0 - mu), c / mu))
}

/// One multiplicative wealth update in the log domain.
///
/// Returns log_w + log(1 + lambda (x - mu)). A nonpositive factor means the
/// caller passed a stake outside the feasible interval and is reported as an
/// error rather than silently producing -inf.
pub fn wealth_step(log_w: f64, lambda: f64, x: f64, mu: f64) -> Result<f64> {
    let factor = 1.0 + lambda * (x - mu);
    if factor <= 0.0 {
        return Err(Error::NonpositiveFactor {
            factor,
            lambda,
            x,
            mu,
        });
    }
    Ok(log_w + factor.ln())
}

/// Inverts the threshold log(1/alpha) over the grid.
///
/// The retained set is {mu : log W_n(mu) <= log(1/alpha)}. The reported
/// interval is the smallest interval covering the retained grid points,
/// enlarged by one grid step on each side to account for grid resolution and
/// clipped to [0, 1]. An empty retained set yields the empty-flagged interval.
pub fn invert_grid(ledger: &WealthLedger, grid: &CandidateGrid, alpha: f64) -> ConfidenceInterval {
    let threshold = -alpha.ln();
    let points = grid.points();
    debug_assert_eq!(ledger.log_wealth.len(), points.len());
    let mut first = None;
    let mut last = None;
    for (i, lw) in ledger.log_wealth.iter().enumerate() {
        if *lw <= threshold {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    match (first, last) {
        (Some(i), Some(j)) => ConfidenceInterval::new(
            (points[i] - grid.step()).max(0.0),
            (points[j] + grid.step()).min(1.0),
        ),
        _ => ConfidenceInterval::EMPTY,
    }
}

/// Intersects the ledger's running interval with `new_interval` and stores
/// the result. The running interval never grows; an empty intersection is
/// propagated, not treated as an error.
pub fn running_intersect(
    ledger: &mut WealthLedger,
    new_interval: ConfidenceInterval,
) -> ConfidenceInterval {
    let merged = ledger.running.intersect(&new_interval);
    ledger.running = merged;
    merged
}

/// Raw and running-intersection intervals after one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepIntervals {
    pub raw: ConfidenceInterval,
    pub running: ConfidenceInterval,
}

/// Applies one observation at every grid point with the given predictable
/// stakes, then recomputes and intersects the intervals.
///
/// All stakes are validated against their betting intervals before any state
/// is mutated, so a failed call leaves the ledger untouched.
pub fn process_observation(
    ledger: &mut WealthLedger,
    x: f64,
    lambdas: &[f64],
    grid: &CandidateGrid,
    config: &BettingConfig,
) -> Result<StepIntervals> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::ObservationOutOfRange {
            value: x,
            index: ledger.n as usize,
        });
    }
    let points = grid.points();
    debug_assert_eq!(ledger.log_wealth.len(), points.len());
    if lambdas.len() != points.len() {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            value: lambdas.len() as f64,
            constraint: "must have one stake per grid point",
        });
    }
    for (i, (&lambda, &mu)) in lambdas.iter().zip(points.iter()).enumerate() {
        let (lo, hi) = betting_interval(mu, config.c)?;
        if !(lo..=hi).contains(&lambda) {
            return Err(Error::StakeOutOfInterval { lambda, mu, index: i });
        }
    }
    for (i, (&lambda, &mu)) in lambdas.iter().zip(points.iter()).enumerate() {
        ledger.log_wealth[i] = wealth_step(ledger.log_wealth[i], lambda, x, mu)?;
    }
    ledger.n += 1;
    let raw = invert_grid(ledger, grid, config.alpha);
    ledger.last_raw = raw;
    let running = running_intersect(ledger, raw);
    Ok(StepIntervals { raw, running })
}

/// Header for the per-step streaming CSV.
pub const STREAM_CSV_HEADER: &str = "n,x,lower,upper,raw_lower,raw_upper,empty_flag";

/// One streaming CSV row: running interval first, then the raw per-step
/// interval. Floats carry 15 decimal places.
pub fn stream_csv_row(n: u64, x: f64, step: &StepIntervals) -> String {
    format!(
        "{},{:.15},{:.15},{:.15},{:.15},{:.15},{}",
        n,
        x,
        step.running.lower,
        step.running.upper,
        step.raw.lower,
        step.raw.upper,
        u8::from(step.running.empty)
    )
}
