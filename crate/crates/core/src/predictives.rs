//! The five predictable forecast constructions.
//!
//! Each construction maps the observation history X_{1:n-1} (and fixed
//! configuration) to a distribution on [0, 1] used to pick the next stake:
//!
//! * empirical: uniform atoms at past observations;
//! * parametric: posterior predictive of a beta working model in
//!   mean-concentration form, X | rho, nu ~ Beta(rho nu, (1-rho) nu);
//! * mdp: the convex combination kappa/(kappa+n) parametric + n/(kappa+n)
//!   empirical, a Polya-urn-style interpolation that starts prior-driven and
//!   becomes data-driven;
//! * betel / retel: a pseudo-posterior over candidate means built from
//!   exponentially tilted empirical likelihood, mixed over the tilted
//!   distributions themselves. retel adds half-mass pseudo-observations at
//!   the endpoints (weight tau) so every mean in (0, 1) is attainable.
//!
//! Degenerate inputs (empty or constant histories where a construction is
//! undefined) yield `None`: downstream the stake defaults to zero, which
//! keeps the wealth process flat and validity untouched.

use crate::betting::{Atom, BetaComponent, PredictiveDistribution};
use crate::error::{Error, Result};
use crate::num;
use statrs::distribution::{Beta as BetaDist, ContinuousCDF, Gamma as GammaDist};
use statrs::function::beta::ln_beta;

/// Observation history; values validated into [0, 1]. A sorted value/count
/// table is maintained so repeated values (Bernoulli-like streams) collapse
/// in every downstream sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    xs: Vec<f64>,
    unique: Vec<(f64, u32)>,
    sum: f64,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let mut h = History::new();
        for &x in values {
            h.push(x)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ObservationOutOfRange {
                value: x,
                index: self.xs.len(),
            });
        }
        self.xs.push(x);
        self.sum += x;
        match self
            .unique
            .binary_search_by(|(v, _)| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => self.unique[i].1 += 1,
            Err(i) => self.unique.insert(i, (x, 1)),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn observations(&self) -> &[f64] {
        &self.xs
    }

    /// Distinct values with multiplicities, ascending.
    pub fn unique_counts(&self) -> &[(f64, u32)] {
        &self.unique
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.xs.len() as f64
    }

    pub fn min(&self) -> Option<f64> {
        self.unique.first().map(|(v, _)| *v)
    }

    pub fn max(&self) -> Option<f64> {
        self.unique.last().map(|(v, _)| *v)
    }

    /// Uniform atoms at the observed values, duplicates merged.
    pub fn atoms(&self) -> Vec<Atom> {
        let n = self.xs.len() as f64;
        self.unique
            .iter()
            .map(|&(x, c)| Atom {
                x,
                w: c as f64 / n,
            })
            .collect()
    }
}

/// Empirical predictive: the past observations as uniform atoms. Histories
/// with at most one observation give no usable forecast and return `None`
/// (the safe zero-stake default downstream).
pub fn empirical_predictive(history: &History) -> Option<PredictiveDistribution> {
    if history.len() <= 1 {
        return None;
    }
    Some(PredictiveDistribution::from_atoms(history.atoms()).expect("history atoms are valid"))
}

/// Beta(a, b) shape pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta shape",
                value: self.a.min(self.b),
                constraint: "must be positive",
            });
        }
        Ok(())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln() - ln_beta(self.a, self.b)
    }
}

/// Gamma(shape, rate) parameters; mean = shape / rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma parameter",
                value: self.shape.min(self.rate),
                constraint: "must be positive",
            });
        }
        Ok(())
    }
}

/// Priors for the beta working model: rho ~ Beta, nu ~ Gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPriorSpec {
    pub rho: BetaParams,
    pub nu: GammaParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Particle {
    rho: f64,
    nu: f64,
    log_w: f64,
    // cached: shapes and normalizer of Beta(rho nu, (1-rho) nu)
    am1: f64,
    bm1: f64,
    ln_norm: f64,
}

impl Particle {
    fn new(rho: f64, nu: f64, log_w: f64) -> Self {
        let a = rho * nu;
        let b = (1.0 - rho) * nu;
        Particle {
            rho,
            nu,
            log_w,
            am1: a - 1.0,
            bm1: b - 1.0,
            ln_norm: ln_beta(a, b),
        }
    }
}

/// Grid-particle approximation to the posterior over (rho, nu).
///
/// The default construction places particles at prior quantiles, levels
/// (k - 1/2) / K per axis, with uniform initial weights; updates reweight by
/// the beta likelihood and renormalize in the log domain. Any other particle
/// representation (e.g. an SMC cloud computed elsewhere) can be loaded via
/// [`BetaPosterior::from_particles`]; only the induced predictive mixture
/// matters downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPosterior {
    particles: Vec<Particle>,
    clamp_warnings: u64,
}

/// Endpoint clamp for beta log-densities: x in {0, 1} has infinite density
/// ratios for some shapes.
const OBS_CLAMP: f64 = 1e-6;

impl BetaPosterior {
    pub fn from_prior_grid(prior: &BetaPriorSpec, k_rho: usize, k_nu: usize) -> Result<Self> {
        prior.rho.validate()?;
        prior.nu.validate()?;
        if k_rho == 0 || k_nu == 0 {
            return Err(Error::InvalidParameter {
                name: "particle grid",
                value: (k_rho * k_nu) as f64,
                constraint: "grid sizes must be positive",
            });
        }
        let rho_dist = BetaDist::new(prior.rho.a, prior.rho.b).map_err(|_| {
            Error::InvalidParameter {
                name: "rho prior",
                value: prior.rho.a,
                constraint: "invalid beta shapes",
            }
        })?;
        let nu_dist = GammaDist::new(prior.nu.shape, prior.nu.rate).map_err(|_| {
            Error::InvalidParameter {
                name: "nu prior",
                value: prior.nu.shape,
                constraint: "invalid gamma parameters",
            }
        })?;
        let log_w = -((k_rho * k_nu) as f64).ln();
        let mut particles = Vec::with_capacity(k_rho * k_nu);
        for i in 0..k_rho {
            let p = (i as f64 + 0.5) / k_rho as f64;
            let rho = rho_dist.inverse_cdf(p).clamp(1e-12, 1.0 - 1e-12);
            for j in 0..k_nu {
                let q = (j as f64 + 0.5) / k_nu as f64;
                let nu = nu_dist.inverse_cdf(q).max(1e-12);
                particles.push(Particle::new(rho, nu, log_w));
            }
        }
        Ok(BetaPosterior {
            particles,
            clamp_warnings: 0,
        })
    }

    /// Posterior from explicit (rho, nu, weight) triples; weights are
    /// normalized.
    pub fn from_particles(triples: &[(f64, f64, f64)]) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::InvalidParameter {
                name: "particles",
                value: 0.0,
                constraint: "need at least one particle",
            });
        }
        let total: f64 = triples.iter().map(|t| t.2).sum();
        let mut particles = Vec::with_capacity(triples.len());
        for &(rho, nu, w) in triples {
            if !(rho > 0.0 && rho < 1.0 && nu > 0.0 && w > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "particle",
                    value: w,
                    constraint: "rho in (0,1), nu > 0, weight > 0",
                });
            }
            particles.push(Particle::new(rho, nu, (w / total).ln()));
        }
        Ok(BetaPosterior {
            particles,
            clamp_warnings: 0,
        })
    }

    /// Reweights every particle by the Beta(rho nu, (1-rho) nu) likelihood of
    /// `x` and renormalizes. Observations at the endpoints are clamped inward
    /// and counted.
    pub fn update(&mut self, x: f64) {
        let mut xc = x;
        if !(OBS_CLAMP..=1.0 - OBS_CLAMP).contains(&xc) {
            xc = xc.clamp(OBS_CLAMP, 1.0 - OBS_CLAMP);
            self.clamp_warnings += 1;
        }
        let lx = xc.ln();
        let l1x = (1.0 - xc).ln();
        let mut max_lw = f64::NEG_INFINITY;
        for p in &mut self.particles {
            p.log_w += p.am1 * lx + p.bm1 * l1x - p.ln_norm;
            max_lw = max_lw.max(p.log_w);
        }
        let lse: f64 = self
            .particles
            .iter()
            .map(|p| (p.log_w - max_lw).exp())
            .sum::<f64>()
            .ln()
            + max_lw;
        for p in &mut self.particles {
            p.log_w -= lse;
        }
    }

    /// Posterior predictive: one beta component per particle. Particles whose
    /// weight has decayed below floating-point relevance are dropped.
    pub fn predictive(&self) -> PredictiveDistribution {
        let betas: Vec<BetaComponent> = self
            .particles
            .iter()
            .filter_map(|p| {
                let w = p.log_w.exp();
                (w >= num::NEGLIGIBLE_WEIGHT).then_some(BetaComponent {
                    a: p.rho * p.nu,
                    b: (1.0 - p.rho) * p.nu,
                    w,
                })
            })
            .collect();
        PredictiveDistribution::new(Vec::new(), betas).expect("posterior weights are normalized")
    }

    /// Posterior mean of rho.
    pub fn mean_rho(&self) -> f64 {
        self.particles.iter().map(|p| p.log_w.exp() * p.rho).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_w.exp()).collect()
    }

    /// Beta shapes (rho nu, (1 - rho) nu) of each particle. Particle
    /// locations are fixed at construction; only weights change on update.
    pub fn component_shapes(&self) -> Vec<(f64, f64)> {
        self.particles
            .iter()
            .map(|p| (p.rho * p.nu, (1.0 - p.rho) * p.nu))
            .collect()
    }

    pub fn clamp_warnings(&self) -> u64 {
        self.clamp_warnings
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Mixture predictive: kappa/(kappa+m) parametric + m/(kappa+m) empirical,
/// with m the history length. kappa = 0 recovers the empirical predictive
/// exactly (same atoms, same ordering).
pub fn mdp_predictive(
    param_pred: &PredictiveDistribution,
    history: &History,
    kappa: f64,
) -> Result<Option<PredictiveDistribution>> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            constraint: "must be nonnegative",
        });
    }
    if kappa == 0.0 {
        return Ok(empirical_predictive(history));
    }
    let m = history.len() as f64;
    if history.is_empty() {
        return Ok(Some(param_pred.clone()));
    }
    let scale = 1.0 / (kappa + m);
    let atoms: Vec<Atom> = history
        .unique_counts()
        .iter()
        .map(|&(x, c)| Atom {
            x,
            w: c as f64 * scale,
        })
        .collect();
    let mut betas: Vec<BetaComponent> = Vec::with_capacity(param_pred.betas().len());
    let param_w = kappa * scale;
    betas.extend(param_pred.betas().iter().map(|b| BetaComponent {
        a: b.a,
        b: b.b,
        w: b.w * param_w,
    }));
    let mut all_atoms = atoms;
    all_atoms.extend(param_pred.atoms().iter().map(|a| Atom {
        x: a.x,
        w: a.w * param_w,
    }));
    Ok(Some(PredictiveDistribution::new(all_atoms, betas)?))
}

/// Configuration for the tilted-empirical-likelihood constructions.
/// tau = 0 is the unregularized (betel) case; tau > 0 adds the two-point
/// endpoint regularizer with total pseudo-weight tau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtelConfig {
    pub tau: f64,
    pub grid_size: usize,
    pub mu_prior: BetaParams,
}

impl EtelConfig {
    pub fn new(tau: f64, grid_size: usize, mu_prior: BetaParams) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: tau,
                constraint: "must be nonnegative",
            });
        }
        if grid_size < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_size",
                value: grid_size as f64,
                constraint: "must be at least 2",
            });
        }
        mu_prior.validate()?;
        Ok(EtelConfig {
            tau,
            grid_size,
            mu_prior,
        })
    }

    pub fn betel(grid_size: usize, mu_prior: BetaParams) -> Result<Self> {
        Self::new(0.0, grid_size, mu_prior)
    }

    pub fn retel(grid_size: usize, mu_prior: BetaParams) -> Result<Self> {
        Self::new(1.0, grid_size, mu_prior)
    }
}

/// Default tolerance on the tilted-mean residual.
pub const TILT_TOL: f64 = 1e-10;

/// Tilt of the (regularized) empirical measure with mean pinned at `mu0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    /// Exponential tilting parameter.
    pub gamma: f64,
    /// Weight of each observation, original observation order.
    pub sample_weights: Vec<f64>,
    /// Total weight of the two-point regularizer (0 when tau = 0).
    pub regularizer_weight: f64,
    /// Share of the regularizer mass sitting at 1: e^gamma / (1 + e^gamma).
    pub endpoint_mass_p: f64,
    /// The candidate mean the tilt was solved for.
    pub mu0: f64,
}

impl TiltSolution {
    /// Mean of the tilted distribution, recomputed from the weights.
    pub fn tilted_mean(&self, observations: &[f64]) -> f64 {
        let sample: f64 = self
            .sample_weights
            .iter()
            .zip(observations.iter())
            .map(|(w, x)| w * x)
            .sum();
        sample + self.regularizer_weight * self.endpoint_mass_p
    }
}

/// Sufficient statistics for the tilting equation, over distinct values.
struct TiltContext<'a> {
    unique: &'a [(f64, u32)],
    n: f64,
    sum_x: f64,
    tau: f64,
    s_min: f64,
    s_max: f64,
}

impl<'a> TiltContext<'a> {
    fn new(history: &'a History, tau: f64) -> Self {
        let (mut s_min, mut s_max) = (
            history.min().unwrap_or(0.0),
            history.max().unwrap_or(1.0),
        );
        if tau > 0.0 {
            s_min = s_min.min(0.0);
            s_max = s_max.max(1.0);
        }
        TiltContext {
            unique: history.unique_counts(),
            n: history.len() as f64,
            sum_x: history.len() as f64 * if history.is_empty() { 0.0 } else { history.mean() },
            tau,
            s_min,
            s_max,
        }
    }

    /// Tilted mean, tilted variance, and log of the unnormalized partition
    /// sum D = S0 + (tau/2)(1 + e^gamma). The max exponent over the support
    /// is factored out so large |gamma| stays finite.
    fn moments(&self, gamma: f64) -> (f64, f64, f64) {
        let shift = if gamma >= 0.0 {
            gamma * self.s_max
        } else {
            gamma * self.s_min
        };
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for &(x, c) in self.unique {
            let e = (c as f64) * (gamma * x - shift).exp();
            e0 += e;
            e1 += e * x;
            e2 += e * x * x;
        }
        if self.tau > 0.0 {
            let h0 = 0.5 * self.tau * (-shift).exp();
            let h1 = 0.5 * self.tau * (gamma - shift).exp();
            e0 += h0 + h1;
            e1 += h1;
            e2 += h1;
        }
        let mean = e1 / e0;
        let var = (e2 / e0 - mean * mean).max(0.0);
        (mean, var, shift + e0.ln())
    }
}

/// Solved tilt in compact form: enough to reconstruct every weight.
#[derive(Debug, Clone, Copy)]
struct TiltCore {
    gamma: f64,
    ln_d: f64,
}

fn solve_tilt(ctx: &TiltContext, mu0: f64, tol: f64, warm: f64) -> Result<TiltCore> {
    // Bracket the root of m(gamma) - mu0; m is strictly increasing.
    let mut lo = warm - 1.0;
    let mut hi = warm + 1.0;
    let mut r_lo = ctx.moments(lo).0 - mu0;
    let mut r_hi = ctx.moments(hi).0 - mu0;
    let mut width = 2.0;
    for _ in 0..80 {
        if r_lo <= 0.0 && r_hi >= 0.0 {
            break;
        }
        width *= 2.0;
        if r_lo > 0.0 {
            lo -= width;
            r_lo = ctx.moments(lo).0 - mu0;
        }
        if r_hi < 0.0 {
            hi += width;
            r_hi = ctx.moments(hi).0 - mu0;
        }
    }
    if !(r_lo <= 0.0 && r_hi >= 0.0) {
        let (hull_lo, hull_hi) = (ctx.s_min, ctx.s_max);
        return Err(Error::HullViolation {
            mu0,
            lo: hull_lo,
            hi: hull_hi,
        });
    }
    let mut ln_d = 0.0;
    let (gamma, _res) = num::newton_bisect_root(
        |g| {
            let (mean, var, ld) = ctx.moments(g);
            ln_d = ld;
            (mean - mu0, var)
        },
        lo,
        hi,
        tol,
        warm.clamp(lo, hi),
    );
    Ok(TiltCore { gamma, ln_d })
}

fn materialize_tilt(
    history: &History,
    tau: f64,
    mu0: f64,
    core: TiltCore,
) -> TiltSolution {
    let sample_weights: Vec<f64> = history
        .observations()
        .iter()
        .map(|&x| (core.gamma * x - core.ln_d).exp())
        .collect();
    let regularizer_weight = if tau > 0.0 {
        0.5 * tau * ((-core.ln_d).exp() + (core.gamma - core.ln_d).exp())
    } else {
        0.0
    };
    let endpoint_mass_p = 1.0 / (1.0 + (-core.gamma).exp());
    TiltSolution {
        gamma: core.gamma,
        sample_weights,
        regularizer_weight,
        endpoint_mass_p,
        mu0,
    }
}

/// Solves the tilting equation for one candidate mean.
///
/// With tau = 0 the equation is solvable only for mu0 strictly inside the
/// open hull of the observations (the empirical-likelihood convention sets
/// the likelihood to zero outside); violations are reported as errors.
pub fn etel_tilt_solve(
    history: &History,
    mu0: f64,
    config: &EtelConfig,
    tol: f64,
) -> Result<TiltSolution> {
    if !(mu0 > 0.0 && mu0 < 1.0) {
        return Err(Error::InvalidParameter {
            name: "mu0",
            value: mu0,
            constraint: "must lie in (0, 1)",
        });
    }
    if config.tau == 0.0 {
        let lo = history.min().unwrap_or(f64::NAN);
        let hi = history.max().unwrap_or(f64::NAN);
        if !(mu0 > lo && mu0 < hi) {
            return Err(Error::HullViolation { mu0, lo, hi });
        }
    }
    let ctx = TiltContext::new(history, config.tau);
    let core = solve_tilt(&ctx, mu0, tol, 0.0)?;
    Ok(materialize_tilt(history, config.tau, mu0, core))
}

/// One candidate mean of the pseudo-posterior with its weight and tilt.
#[derive(Debug, Clone)]
pub struct PseudoPosteriorPoint {
    pub mu0: f64,
    pub weight: f64,
    pub tilt: TiltSolution,
}

/// Candidate-mean grid: equally spaced midpoints of (0, 1) when tau > 0,
/// or an inset linspace over the open empirical hull when tau = 0.
fn etel_grid(history: &History, config: &EtelConfig) -> Option<Vec<f64>> {
    let g = config.grid_size;
    if config.tau > 0.0 {
        Some((0..g).map(|k| (k as f64 + 0.5) / g as f64).collect())
    } else {
        let lo = history.min()?;
        let hi = history.max()?;
        if hi <= lo {
            return None;
        }
        let inset = 1e-9 * (hi - lo);
        let (a, b) = (lo + inset, hi - inset);
        let step = (b - a) / (g - 1) as f64;
        Some((0..g).map(|k| a + step * k as f64).collect())
    }
}

fn is_etel_degenerate(history: &History, tau: f64) -> bool {
    if tau > 0.0 {
        history.is_empty()
    } else {
        history.unique_counts().len() < 2
    }
}

/// Grid, compact tilt solutions, and normalized pseudo-posterior weights.
type SweepParts = (Vec<f64>, Vec<TiltCore>, Vec<f64>);

/// Shared grid sweep: solves the tilt at every grid point and returns the
/// normalized log pseudo-posterior. Guesses come from `warm` (per-point
/// solutions of a previous sweep) when available, otherwise from the
/// previous grid point (gamma is increasing along the grid); solved values
/// are written back into `warm`.
fn pseudo_posterior_cores(
    history: &History,
    config: &EtelConfig,
    warm: Option<&mut Vec<f64>>,
) -> Result<Option<SweepParts>> {
    if is_etel_degenerate(history, config.tau) {
        return Ok(None);
    }
    let Some(grid) = etel_grid(history, config) else {
        return Ok(None);
    };
    let ctx = TiltContext::new(history, config.tau);
    let n = ctx.n;
    let sum_x = ctx.sum_x;
    let mut cores = Vec::with_capacity(grid.len());
    let mut log_post = Vec::with_capacity(grid.len());
    let reuse = warm
        .as_ref()
        .map(|w| w.len() == grid.len())
        .unwrap_or(false);
    let mut prev = 0.0;
    for (k, &mu0) in grid.iter().enumerate() {
        let guess = if reuse {
            warm.as_ref().expect("checked")[k]
        } else {
            prev
        };
        let core = solve_tilt(&ctx, mu0, TILT_TOL, guess)?;
        prev = core.gamma;
        // log L_n(mu0) = sum_i log w_{n,i} = gamma * sum_i X_i - n * log D
        let log_lik = core.gamma * sum_x - n * core.ln_d;
        log_post.push(log_lik + config.mu_prior.ln_pdf(mu0));
        cores.push(core);
    }
    if let Some(w) = warm {
        w.clear();
        w.extend(cores.iter().map(|c| c.gamma));
    }
    let max_lp = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = log_post
        .iter()
        .map(|lp| (lp - max_lp).exp())
        .sum::<f64>()
        .ln()
        + max_lp;
    let weights: Vec<f64> = log_post.iter().map(|lp| (lp - lse).exp()).collect();
    Ok(Some((grid, cores, weights)))
}

/// Pseudo-posterior over a grid of candidate means: at each grid point the
/// tilt is solved and log L_n(mu0) + log prior is accumulated, normalized by
/// log-sum-exp. Degenerate histories give `None`.
pub fn betel_pseudo_posterior(
    history: &History,
    config: &EtelConfig,
) -> Result<Option<Vec<PseudoPosteriorPoint>>> {
    let Some((grid, cores, weights)) = pseudo_posterior_cores(history, config, None)? else {
        return Ok(None);
    };
    let points = grid
        .iter()
        .zip(cores.iter())
        .zip(weights.iter())
        .map(|((&mu0, &core), &weight)| PseudoPosteriorPoint {
            mu0,
            weight,
            tilt: materialize_tilt(history, config.tau, mu0, core),
        })
        .collect();
    Ok(Some(points))
}

/// The pseudo-predictive: the tilted distributions mixed over the
/// pseudo-posterior. Support is the observed sample points, plus the two
/// endpoints when tau > 0.
pub fn etel_predictive(
    history: &History,
    config: &EtelConfig,
) -> Result<Option<PredictiveDistribution>> {
    etel_predictive_warm(history, config, None)
}

fn etel_predictive_warm(
    history: &History,
    config: &EtelConfig,
    warm: Option<&mut Vec<f64>>,
) -> Result<Option<PredictiveDistribution>> {
    let Some((_grid, cores, weights)) = pseudo_posterior_cores(history, config, warm)? else {
        return Ok(None);
    };
    let unique = history.unique_counts();
    let mut atom_w = vec![0.0; unique.len()];
    let mut w_zero = 0.0;
    let mut w_one = 0.0;
    let half_tau = 0.5 * config.tau;
    for (core, &pi) in cores.iter().zip(weights.iter()) {
        if pi < num::NEGLIGIBLE_WEIGHT {
            continue;
        }
        for (acc, &(x, c)) in atom_w.iter_mut().zip(unique.iter()) {
            *acc += pi * (c as f64) * (core.gamma * x - core.ln_d).exp();
        }
        if config.tau > 0.0 {
            w_zero += pi * half_tau * (-core.ln_d).exp();
            w_one += pi * half_tau * (core.gamma - core.ln_d).exp();
        }
    }
    let mut atoms: Vec<Atom> = Vec::with_capacity(unique.len() + 2);
    if config.tau > 0.0 && unique.first().map(|u| u.0) != Some(0.0) {
        atoms.push(Atom { x: 0.0, w: w_zero });
        w_zero = 0.0;
    }
    for (&(x, _), &w) in unique.iter().zip(atom_w.iter()) {
        let mut w = w;
        if x == 0.0 {
            w += w_zero;
        }
        if x == 1.0 {
            w += w_one;
            w_one = 0.0;
        }
        atoms.push(Atom { x, w });
    }
    if config.tau > 0.0 && w_one > 0.0 {
        atoms.push(Atom { x: 1.0, w: w_one });
    }
    // The mixture weights sum to one analytically; renormalize away the
    // accumulated floating-point drift.
    let total: f64 = atoms.iter().map(|a| a.w).sum();
    for a in &mut atoms {
        a.w /= total;
    }
    Ok(Some(PredictiveDistribution::from_atoms(atoms)?))
}

/// Stateful sweep for streaming use: carries per-grid-point tilt solutions
/// across steps as warm starts (gamma moves O(1/n) when one observation
/// arrives).
#[derive(Debug, Clone)]
pub struct EtelSweep {
    config: EtelConfig,
    warm: Vec<f64>,
}

impl EtelSweep {
    pub fn new(config: EtelConfig) -> Self {
        EtelSweep {
            config,
            warm: Vec::new(),
        }
    }

    pub fn config(&self) -> &EtelConfig {
        &self.config
    }

    pub fn predictive(&mut self, history: &History) -> Result<Option<PredictiveDistribution>> {
        etel_predictive_warm(history, &self.config, Some(&mut self.warm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::betting::solve_lambda;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::Distribution;

    #[test]
    fn history_tracks_unique_counts() {
        let mut h = History::new();
        for &x in &[0.5, 0.2, 0.5, 0.9, 0.2, 0.5] {
            h.push(x).unwrap();
        }
        assert_eq!(h.len(), 6);
        assert_eq!(h.unique_counts(), &[(0.2, 2), (0.5, 3), (0.9, 1)]);
        assert!((h.mean() - 2.8 / 6.0).abs() < 1e-15);
        assert!(h.push(1.5).is_err());
    }

    #[test]
    fn empirical_predictive_examples() {
        let h = History::from_slice(&[0.2, 0.8]).unwrap();
        let p = empirical_predictive(&h).unwrap();
        assert_eq!(p.atoms(), &[Atom { x: 0.2, w: 0.5 }, Atom { x: 0.8, w: 0.5 }]);

        assert!(empirical_predictive(&History::new()).is_none());
        assert!(empirical_predictive(&History::from_slice(&[0.4]).unwrap()).is_none());
    }

    #[test]
    fn merged_duplicates_solve_identically() {
        let merged = empirical_predictive(&History::from_slice(&[0.5, 0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(merged.atoms().len(), 1);
        let split = PredictiveDistribution::from_atoms(vec![
            Atom { x: 0.5, w: 1.0 / 3.0 },
            Atom { x: 0.5, w: 1.0 / 3.0 },
            Atom { x: 0.5, w: 1.0 / 3.0 },
        ])
        .unwrap();
        for mu in [0.3, 0.5, 0.8] {
            let a = solve_lambda(&merged, mu, 0.95, 1e-10).unwrap();
            let b = solve_lambda(&split, mu, 0.95, 1e-10).unwrap();
            assert!((a.lambda - b.lambda).abs() < 1e-12, "mu={mu}");
        }
    }

    #[test]
    fn posterior_update_keeps_symmetry() {
        let mut post =
            BetaPosterior::from_particles(&[(0.3, 2.0, 0.5), (0.7, 2.0, 0.5)]).unwrap();
        post.update(0.5);
        let w = post.weights();
        assert!((w[0] - w[1]).abs() < 1e-12);
        assert!((w[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posterior_grid_concentrates_near_true_mean() {
        // Non-informative prior, 50 draws from Beta(10, 30); the posterior
        // mean of rho should sit near 0.25.
        let prior = BetaPriorSpec {
            rho: BetaParams { a: 1.0, b: 1.0 },
            nu: GammaParams {
                shape: 1.5,
                rate: 1.0,
            },
        };
        let mut post = BetaPosterior::from_prior_grid(&prior, 40, 25).unwrap();
        assert_eq!(post.len(), 1000);
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let beta = rand_distr::Beta::new(10.0, 30.0).unwrap();
        for _ in 0..50 {
            post.update(beta.sample(&mut rng));
        }
        assert!((post.mean_rho() - 0.25).abs() < 0.05, "{}", post.mean_rho());
    }

    #[test]
    fn posterior_predictive_components() {
        let post = BetaPosterior::from_particles(&[(0.5, 4.0, 1.0)]).unwrap();
        let pred = post.predictive();
        assert_eq!(pred.betas().len(), 1);
        assert!((pred.betas()[0].a - 2.0).abs() < 1e-12);
        assert!((pred.betas()[0].b - 2.0).abs() < 1e-12);

        let post =
            BetaPosterior::from_particles(&[(0.3, 2.0, 0.5), (0.6, 8.0, 0.5)]).unwrap();
        let pred = post.predictive();
        assert!((pred.betas()[0].w - 0.5).abs() < 1e-12);
        // predictive mean equals the weighted mean of rho
        assert!((pred.mean() - (0.5 * 0.3 + 0.5 * 0.6)).abs() < 1e-12);
        assert!((pred.mean() - post.mean_rho()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_observations_are_clamped() {
        let prior = BetaPriorSpec {
            rho: BetaParams { a: 1.0, b: 1.0 },
            nu: GammaParams {
                shape: 1.5,
                rate: 1.0,
            },
        };
        let mut post = BetaPosterior::from_prior_grid(&prior, 10, 5).unwrap();
        post.update(0.0);
        post.update(1.0);
        post.update(0.5);
        assert_eq!(post.clamp_warnings(), 2);
        let total: f64 = post.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mdp_weight_arithmetic() {
        let param = PredictiveDistribution::new(
            vec![],
            vec![BetaComponent {
                a: 2.0,
                b: 2.0,
                w: 1.0,
            }],
        )
        .unwrap();
        let mut h = History::new();
        for i in 0..50 {
            h.push((i as f64 + 0.5) / 50.0).unwrap();
        }
        let pred = mdp_predictive(&param, &h, 50.0).unwrap().unwrap();
        let atom_mass: f64 = pred.atoms().iter().map(|a| a.w).sum();
        let beta_mass: f64 = pred.betas().iter().map(|b| b.w).sum();
        assert!((atom_mass - 0.5).abs() < 1e-12);
        assert!((beta_mass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mdp_kappa_zero_is_empirical() {
        let param = PredictiveDistribution::new(
            vec![],
            vec![BetaComponent {
                a: 2.0,
                b: 2.0,
                w: 1.0,
            }],
        )
        .unwrap();
        let h = History::from_slice(&[0.2, 0.7, 0.2]).unwrap();
        let mdp = mdp_predictive(&param, &h, 0.0).unwrap().unwrap();
        let emp = empirical_predictive(&h).unwrap();
        assert_eq!(mdp, emp);
        // and the sentinel path matches too
        assert!(mdp_predictive(&param, &History::new(), 0.0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn mdp_empty_history_returns_param() {
        let param = PredictiveDistribution::new(
            vec![],
            vec![BetaComponent {
                a: 3.0,
                b: 1.0,
                w: 1.0,
            }],
        )
        .unwrap();
        let pred = mdp_predictive(&param, &History::new(), 50.0)
            .unwrap()
            .unwrap();
        assert_eq!(pred, param);
    }

    fn flat_etel(tau: f64) -> EtelConfig {
        EtelConfig::new(tau, 1000, BetaParams { a: 1.0, b: 1.0 }).unwrap()
    }

    #[test]
    fn tilt_identity_when_mean_matches() {
        let h = History::from_slice(&[0.5]).unwrap();
        let sol = etel_tilt_solve(&h, 0.5, &flat_etel(1.0), 1e-10).unwrap();
        assert!(sol.gamma.abs() < 1e-9);
        assert!((sol.sample_weights[0] - 0.5).abs() < 1e-9);
        assert!((sol.regularizer_weight - 0.5).abs() < 1e-9);
        assert!((sol.endpoint_mass_p - 0.5).abs() < 1e-9);

        // any history with mean 1/2 keeps gamma = 0 under the symmetric
        // regularizer
        let h = History::from_slice(&[0.1, 0.9, 0.3, 0.7]).unwrap();
        let sol = etel_tilt_solve(&h, 0.5, &flat_etel(1.0), 1e-12).unwrap();
        assert!(sol.gamma.abs() < 1e-10);
    }

    #[test]
    fn tilt_hits_requested_mean() {
        let h = History::from_slice(&[0.2, 0.4, 0.9]).unwrap();
        let sol = etel_tilt_solve(&h, 0.7, &flat_etel(1.0), 1e-10).unwrap();
        let mean = sol.tilted_mean(h.observations());
        assert!((mean - 0.7).abs() < 1e-10, "tilted mean {mean}");
        let total: f64 =
            sol.sample_weights.iter().sum::<f64>() + sol.regularizer_weight;
        assert!((total - 1.0).abs() < 1e-12);

        // betel case: mean pinned using sample weights alone
        let sol = etel_tilt_solve(&h, 0.7, &flat_etel(0.0), 1e-10).unwrap();
        assert_eq!(sol.regularizer_weight, 0.0);
        assert!((sol.tilted_mean(h.observations()) - 0.7).abs() < 1e-10);
    }

    #[test]
    fn tilt_rejects_hull_violation() {
        let h = History::from_slice(&[0.4, 0.6]).unwrap();
        let err = etel_tilt_solve(&h, 0.7, &flat_etel(0.0), 1e-10).unwrap_err();
        assert!(matches!(err, Error::HullViolation { .. }));
        // inside the hull is fine
        assert!(etel_tilt_solve(&h, 0.55, &flat_etel(0.0), 1e-10).is_ok());
    }

    #[test]
    fn pseudo_posterior_degenerate_history() {
        let h = History::from_slice(&[0.3, 0.3, 0.3]).unwrap();
        assert!(betel_pseudo_posterior(&h, &flat_etel(0.0))
            .unwrap()
            .is_none());
        // but fine with the regularizer
        assert!(betel_pseudo_posterior(&h, &flat_etel(1.0))
            .unwrap()
            .is_some());
    }

    #[test]
    fn pseudo_posterior_peaks_at_sample_mean() {
        let h = History::from_slice(&[0.2, 0.5, 0.9]).unwrap();
        let config = flat_etel(0.0);
        let points = betel_pseudo_posterior(&h, &config).unwrap().unwrap();
        assert_eq!(points.len(), 1000);
        let best = points
            .iter()
            .max_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap())
            .unwrap();
        let spacing = 0.7 / 999.0;
        assert!((best.mu0 - h.mean()).abs() <= spacing, "peak at {}", best.mu0);
        let total: f64 = points.iter().map(|p| p.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pseudo_posterior_concentrates() {
        // 200 draws from Beta(10, 30); mass within +-0.1 of 0.25 should
        // dominate.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let beta = rand_distr::Beta::new(10.0, 30.0).unwrap();
        let mut h = History::new();
        for _ in 0..200 {
            h.push(beta.sample(&mut rng)).unwrap();
        }
        let points = betel_pseudo_posterior(&h, &flat_etel(1.0)).unwrap().unwrap();
        let near: f64 = points
            .iter()
            .filter(|p| (p.mu0 - 0.25).abs() <= 0.1)
            .map(|p| p.weight)
            .sum();
        assert!(near > 0.95, "mass near 0.25 = {near}");
    }

    #[test]
    fn etel_predictive_support() {
        let h = History::from_slice(&[0.2, 0.5, 0.9]).unwrap();
        let betel = etel_predictive(&h, &flat_etel(0.0)).unwrap().unwrap();
        let support: Vec<f64> = betel.atoms().iter().map(|a| a.x).collect();
        assert_eq!(support, vec![0.2, 0.5, 0.9]);
        let total: f64 = betel.atoms().iter().map(|a| a.w).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let retel = etel_predictive(&h, &flat_etel(1.0)).unwrap().unwrap();
        let support: Vec<f64> = retel.atoms().iter().map(|a| a.x).collect();
        assert_eq!(support, vec![0.0, 0.2, 0.5, 0.9, 1.0]);
    }

    #[test]
    fn etel_predictive_mean_mixes_posterior() {
        // With a single observation every tilted component has mean mu0, so
        // the predictive mean is the posterior mean of mu0.
        let h = History::from_slice(&[0.5]).unwrap();
        let config = flat_etel(1.0);
        let points = betel_pseudo_posterior(&h, &config).unwrap().unwrap();
        let posterior_mean: f64 = points.iter().map(|p| p.weight * p.mu0).sum();
        let pred = etel_predictive(&h, &config).unwrap().unwrap();
        assert!((pred.mean() - posterior_mean).abs() < 1e-9);
    }

    #[test]
    fn etel_predictive_merges_endpoint_atoms() {
        // Bernoulli-style history already has atoms at the endpoints; the
        // regularizer mass must merge into them.
        let h = History::from_slice(&[0.0, 1.0, 1.0]).unwrap();
        let pred = etel_predictive(&h, &flat_etel(1.0)).unwrap().unwrap();
        assert_eq!(pred.atoms().len(), 2);
        assert_eq!(pred.atoms()[0].x, 0.0);
        assert_eq!(pred.atoms()[1].x, 1.0);
    }
}
