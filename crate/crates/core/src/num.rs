//! Numerical utilities: quadrature, root finding, seed derivation.

use std::sync::OnceLock;

/// Mixture weights below this threshold contribute less than f64 rounding
/// noise to any expectation over [0, 1] and are skipped in hot loops.
pub(crate) const NEGLIGIBLE_WEIGHT: f64 = 1e-16;

/// SplitMix64 finalizer. Used to derive per-repetition seeds from a base seed
/// and a counter; the mapping is fixed so runs are reproducible across
/// platforms.
pub fn split_seed(base: u64, counter: u64) -> u64 {
    let mut z = base
        .wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gauss-Legendre rule on [0, 1], with precomputed factors for integrating
/// against beta densities.
///
/// Beta expectations use the substitution x = sin^2(pi u / 2), which absorbs
/// the x^(a-1) (1-x)^(b-1) endpoint behaviour into smooth half-angle powers:
///
/// ```text
/// E[g(X)] = sum_j w_j * pi * sin(pi u_j/2)^(2a-1) cos(pi u_j/2)^(2b-1) / B(a,b) * g(x_j)
/// ```
///
/// For a = b = 1/2 the weight is exactly constant; for smooth shapes the rule
/// keeps its spectral accuracy. Per-component weights are renormalized to sum
/// to one so each component integrates the constant function exactly.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    /// Transformed abscissae x_j = sin^2(pi u_j / 2), strictly inside (0, 1).
    pub x: Vec<f64>,
    /// log(w_j * pi) at each node.
    ln_w: Vec<f64>,
    /// log sin(pi u_j / 2).
    ln_sin: Vec<f64>,
    /// log cos(pi u_j / 2).
    ln_cos: Vec<f64>,
}

pub const DEFAULT_QUAD_NODES: usize = 64;

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = legendre_rule_unit(n);
        let mut x = Vec::with_capacity(n);
        let mut ln_w = Vec::with_capacity(n);
        let mut ln_sin = Vec::with_capacity(n);
        let mut ln_cos = Vec::with_capacity(n);
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let half = std::f64::consts::FRAC_PI_2 * u;
            let (s, c) = half.sin_cos();
            x.push(s * s);
            ln_w.push((w * std::f64::consts::PI).ln());
            ln_sin.push(s.ln());
            ln_cos.push(c.ln());
        }
        GaussLegendre {
            x,
            ln_w,
            ln_sin,
            ln_cos,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Quadrature weights for a Beta(a, b) density at the transformed nodes,
    /// normalized to sum to one.
    pub fn beta_weights(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.accumulate_beta_weights(a, b, 1.0, &mut out);
        out
    }

    /// Adds `scale` times the normalized Beta(a, b) node weights into `acc`.
    pub fn accumulate_beta_weights(&self, a: f64, b: f64, scale: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.len());
        let ln_beta = statrs::function::beta::ln_beta(a, b);
        let ca = 2.0 * a - 1.0;
        let cb = 2.0 * b - 1.0;
        // Factor out the max exponent so extreme shapes stay in range.
        let mut ln_vals = Vec::with_capacity(self.len());
        let mut max_ln = f64::NEG_INFINITY;
        for j in 0..self.len() {
            let lv = self.ln_w[j] + ca * self.ln_sin[j] + cb * self.ln_cos[j] - ln_beta;
            max_ln = max_ln.max(lv);
            ln_vals.push(lv);
        }
        let mut total = 0.0;
        for lv in &mut ln_vals {
            *lv = (*lv - max_ln).exp();
            total += *lv;
        }
        let norm = scale / total;
        for (dst, v) in acc.iter_mut().zip(ln_vals.iter()) {
            *dst += v * norm;
        }
    }
}

/// Shared default 64-node rule.
pub fn default_quadrature() -> &'static GaussLegendre {
    static QUAD: OnceLock<GaussLegendre> = OnceLock::new();
    QUAD.get_or_init(|| GaussLegendre::new(DEFAULT_QUAD_NODES))
}

/// Gauss-Legendre nodes and weights on [0, 1]. Newton iteration on the
/// Legendre recurrence; nodes are accurate to machine precision.
fn legendre_rule_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "quadrature needs at least 2 nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess for the i-th root of P_n on [-1, 1].
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(t) and P_n'(t) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = t;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = t;
        weights[i] = w;
        nodes[n - 1 - i] = -t;
        weights[n - 1 - i] = w;
    }
    // Map from [-1, 1] to [0, 1]; descending t gives ascending u.
    let nodes = nodes.iter().map(|t| 0.5 * (1.0 - t)).collect();
    let weights = weights.iter().map(|w| 0.5 * w).collect();
    (nodes, weights)
}

/// Root of a strictly increasing function on a bracket, by Newton steps
/// safeguarded with bisection. `eval` returns `(f(x), f'(x))`.
///
/// The bracket [lo, hi] must satisfy f(lo) <= 0 <= f(hi). Stops once
/// |f(x)| <= tol or the bracket collapses to floating-point width; returns
/// the abscissa and the residual there.
pub fn newton_bisect_root<F>(
    mut eval: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    guess: f64,
) -> (f64, f64)
where
    F: FnMut(f64) -> (f64, f64),
{
    debug_assert!(lo <= hi);
    let mut x = guess.clamp(lo, hi);
    if !x.is_finite() {
        x = 0.5 * (lo + hi);
    }
    let (mut f, mut df) = eval(x);
    for _ in 0..200 {
        if f.abs() <= tol {
            return (x, f);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            return (x, f);
        }
        let newton = x - f / df;
        x = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let e = eval(x);
        f = e.0;
        df = e.1;
    }
    (x, f)
}
