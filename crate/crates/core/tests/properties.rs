//! Property tests for the solver, quadrature, and distance invariants.

use betcs::betting::{
    expected_loggrowth, expected_score, solve_lambda, Atom, BetaComponent,
    PredictiveDistribution,
};
use betcs::engine::betting_interval;
use betcs::oracle::{oracle_lambda, wasserstein1, TrueLaw, W1Side};
use betcs::predictives::{BetaParams, History};
use betcs::{BettingConfig, CsStream, MethodSpec};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn atom_pred_strategy(max_atoms: usize) -> impl Strategy<Value = PredictiveDistribution> {
    prop::collection::vec((0.0f64..=1.0, 0.05f64..1.0), 2..=max_atoms).prop_map(|raw| {
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let atoms = raw
            .into_iter()
            .map(|(x, w)| Atom { x, w: w / total })
            .collect();
        PredictiveDistribution::from_atoms(atoms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The score is strictly decreasing in lambda over the feasible region
    /// for non-degenerate forecasts.
    #[test]
    fn score_is_decreasing(
        pred in atom_pred_strategy(8),
        mu in 0.05f64..0.95,
    ) {
        prop_assume!(!pred.is_degenerate_at(mu));
        let (lo, hi) = betting_interval(mu, 0.95).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let lambda = lo + (hi - lo) * k as f64 / 20.0;
            let s = expected_score(&pred, lambda, mu).unwrap();
            prop_assert!(s < prev + 1e-12, "score not decreasing at {lambda}");
            prev = s;
        }
    }

    /// The solved stake dominates every grid alternative in expected
    /// log-growth, up to 1e-8.
    #[test]
    fn solver_is_optimal_on_grid(
        pred in atom_pred_strategy(10),
        mu in 0.05f64..0.95,
    ) {
        let sol = solve_lambda(&pred, mu, 0.95, 1e-12).unwrap();
        let best = expected_loggrowth(&pred, sol.lambda, mu).unwrap();
        let (lo, hi) = betting_interval(mu, 0.95).unwrap();
        let margin = 1e-12 * (hi - lo);
        for k in 0..=10_000 {
            let lambda = (lo + (hi - lo) * k as f64 / 10_000.0).clamp(lo + margin, hi - margin);
            let alt = expected_loggrowth(&pred, lambda, mu).unwrap();
            prop_assert!(best >= alt - 1e-8, "stake {} beaten at {lambda}", sol.lambda);
        }
    }

    /// The stake has the sign of (forecast mean - mu), or is zero.
    #[test]
    fn stake_sign_matches_mean_offset(
        pred in atom_pred_strategy(8),
        mu in 0.05f64..0.95,
    ) {
        let sol = solve_lambda(&pred, mu, 0.95, 1e-12).unwrap();
        let offset = pred.mean() - mu;
        if sol.lambda != 0.0 {
            prop_assert!(
                sol.lambda * offset >= 0.0,
                "stake {} vs offset {offset}",
                sol.lambda
            );
        }
    }

    /// One-step log increments never fall below log(1 - c).
    #[test]
    fn wealth_increment_is_bounded_below(
        mu in 0.05f64..0.95,
        x in 0.0f64..=1.0,
        t in 0.0f64..=1.0,
        c in 0.5f64..0.99,
    ) {
        let (lo, hi) = betting_interval(mu, c).unwrap();
        let lambda = lo + (hi - lo) * t;
        let inc = betcs::engine::wealth_step(0.0, lambda, x, mu).unwrap();
        prop_assert!(inc >= (1.0 - c).ln() - 1e-12);
    }

    /// Wasserstein-1 on atoms: symmetry and the triangle inequality.
    #[test]
    fn w1_symmetry_and_triangle(
        a in atom_pred_strategy(6),
        b in atom_pred_strategy(6),
        c in atom_pred_strategy(6),
    ) {
        let dab = wasserstein1(W1Side::Pred(&a), W1Side::Pred(&b));
        let dba = wasserstein1(W1Side::Pred(&b), W1Side::Pred(&a));
        prop_assert!((dab - dba).abs() < 1e-14);
        let dac = wasserstein1(W1Side::Pred(&a), W1Side::Pred(&c));
        let dcb = wasserstein1(W1Side::Pred(&c), W1Side::Pred(&b));
        prop_assert!(dab <= dac + dcb + 1e-12);
    }

    /// Tilts pin the requested mean and the weights form a distribution.
    #[test]
    fn tilt_moment_constraint(
        values in prop::collection::vec(0.0f64..=1.0, 1..40),
        mu0 in 0.02f64..0.98,
    ) {
        let history = History::from_slice(&values).unwrap();
        let config = betcs::predictives::EtelConfig::retel(100, BetaParams { a: 1.0, b: 1.0 })
        .unwrap();
        let sol = betcs::predictives::etel_tilt_solve(&history, mu0, &config, 1e-10).unwrap();
        let mean = sol.tilted_mean(history.observations());
        prop_assert!((mean - mu0).abs() <= 1e-8);
        let total: f64 = sol.sample_weights.iter().sum::<f64>() + sol.regularizer_weight;
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }
}

/// Quadrature expectations match Monte Carlo for beta components within
/// three Monte-Carlo standard errors.
#[test]
fn quadrature_matches_monte_carlo() {
    let mut rng = ChaCha12Rng::seed_from_u64(314);
    for case in 0..6 {
        let a = 0.5 + 9.5 * rng.random::<f64>();
        let b = 0.5 + 9.5 * rng.random::<f64>();
        let mu = 0.2 + 0.6 * rng.random::<f64>();
        let (lo, hi) = betting_interval(mu, 0.95).unwrap();
        let lambda = lo + (hi - lo) * rng.random::<f64>();
        let pred = PredictiveDistribution::new(
            vec![],
            vec![BetaComponent { a, b, w: 1.0 }],
        )
        .unwrap();
        let quad_score = expected_score(&pred, lambda, mu).unwrap();

        let law = TrueLaw::Beta { a, b };
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = law.sample(&mut rng);
            let v = (x - mu) / (1.0 + lambda * (x - mu));
            sum += v;
            sumsq += v * v;
        }
        let mc = sum / n as f64;
        let se = ((sumsq / n as f64 - mc * mc).max(0.0) / n as f64).sqrt();
        assert!(
            (quad_score - mc).abs() <= 3.0 * se + 1e-9,
            "case {case}: quad {quad_score} vs mc {mc} (se {se}) for Beta({a:.3},{b:.3}), mu={mu:.3}, lambda={lambda:.3}"
        );
    }
}

/// Bernoulli closed form matches the numeric maximizer across a mean grid.
#[test]
fn bernoulli_closed_form_grid() {
    for &p in &[0.1, 0.5, 0.9] {
        let law = TrueLaw::Bernoulli(p);
        for k in 1..100 {
            let mu = k as f64 / 100.0;
            let (lo, hi) = betting_interval(mu, 0.95).unwrap();
            let closed = ((p - mu) / (mu * (1.0 - mu))).clamp(lo, hi);
            let sol = oracle_lambda(&law, mu, 0.95).unwrap();
            assert!(
                (sol.lambda - closed).abs() < 1e-9,
                "p={p} mu={mu}: {} vs {closed}",
                sol.lambda
            );
        }
    }
}

/// For consistent forecasts the stake approaches the oracle stake: in at
/// least 95% of runs the error at n = 2000 falls below the average error at
/// n = 100. (The per-run comparison against the run's own n = 100 error has
/// a ceiling near 86% for root-n-consistent stakes - two centered normals
/// with standard-deviation ratio sqrt(100/2000) - so the convergence claim
/// is pinned against the n = 100 average.)
#[test]
fn stake_converges_to_oracle() {
    let law = TrueLaw::Bernoulli(0.5);
    let mu = 0.25;
    let lambda_star = oracle_lambda(&law, mu, 0.95).unwrap().lambda;
    let reps = 60;
    let mut errs_100 = Vec::with_capacity(reps as usize);
    let mut errs_2000 = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = ChaCha12Rng::seed_from_u64(betcs::num::split_seed(505, rep));
        let mut history = History::new();
        for i in 0..2000 {
            history.push(law.sample(&mut rng)).unwrap();
            if i + 1 == 100 {
                let pred = betcs::predictives::empirical_predictive(&history).unwrap();
                errs_100.push(
                    (solve_lambda(&pred, mu, 0.95, 1e-12).unwrap().lambda - lambda_star).abs(),
                );
            }
        }
        let pred = betcs::predictives::empirical_predictive(&history).unwrap();
        errs_2000
            .push((solve_lambda(&pred, mu, 0.95, 1e-12).unwrap().lambda - lambda_star).abs());
    }
    let mean_100: f64 = errs_100.iter().sum::<f64>() / reps as f64;
    let improved = errs_2000.iter().filter(|e| **e < mean_100).count();
    assert!(
        improved as f64 >= 0.95 * reps as f64,
        "error at n=2000 below the n=100 average in {improved}/{reps} runs (avg {mean_100:.4})"
    );
    // and the averages themselves shrink roughly with sqrt(n)
    let mean_2000: f64 = errs_2000.iter().sum::<f64>() / reps as f64;
    assert!(mean_2000 < 0.5 * mean_100, "{mean_2000} vs {mean_100}");
}

/// Streams are pure functions of their inputs: identical observations give
/// bitwise-identical ledgers and stakes.
#[test]
fn streams_are_deterministic() {
    let config = BettingConfig::new(0.1, 0.95, 40).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(8080);
    let xs: Vec<f64> = (0..80).map(|_| rng.random()).collect();
    let spec = MethodSpec::Etel {
        config: betcs::predictives::EtelConfig::retel(
            50,
            betcs::predictives::BetaParams { a: 2.0, b: 2.0 },
        )
        .unwrap(),
    };
    let run = |spec: &MethodSpec| {
        let mut s = CsStream::new(spec, config).unwrap();
        let mut stakes_trace: Vec<u64> = Vec::new();
        for &x in &xs {
            s.step(x).unwrap();
            stakes_trace.extend(s.last_stakes().iter().map(|l| l.to_bits()));
        }
        let wealth: Vec<u64> = s.ledger().log_wealth().iter().map(|w| w.to_bits()).collect();
        (stakes_trace, wealth)
    };
    assert_eq!(run(&spec), run(&spec));
}

/// Paired stop-time ordering for the one-sided PPI test: with residuals from
/// a good predictor (mass at zero, occasional +-1 misses, mean +0.1) and the
/// zero-centered rectifier prior, the mdp-driven test rejects no later than
/// the empirical one on average over paired seeds.
#[test]
fn ppi_informative_prior_stops_no_later_on_average() {
    use betcs::ppi::{prior_concentration, PpiStream};
    use betcs::predictives::{BetaPriorSpec, GammaParams};

    let bounds = (-1.0, 1.0);
    let xi = prior_concentration(500, bounds).unwrap();
    let prior = BetaPriorSpec {
        rho: BetaParams { a: xi, b: xi },
        nu: GammaParams {
            shape: 7.5,
            rate: 1.0,
        },
    };
    let config = BettingConfig::new(0.1, 0.95, 100).unwrap();
    let horizon = 600usize;
    let runs = 100u64;
    let (mut mean_mdp, mut mean_emp) = (0.0, 0.0);
    for run in 0..runs {
        let stop = |spec: &MethodSpec| -> usize {
            let mut rng = ChaCha12Rng::seed_from_u64(betcs::num::split_seed(0xEF, run));
            let mut s = PpiStream::new(spec, config, bounds, 0.0).unwrap();
            for i in 0..horizon {
                let u: f64 = rng.random();
                let r = if u < 0.15 {
                    1.0
                } else if u < 0.20 {
                    -1.0
                } else {
                    0.0
                };
                let rec = s.step(r, 0.0).unwrap();
                if rec.theta.empty || rec.theta.lower > 0.0 {
                    return i + 1;
                }
            }
            horizon + 1
        };
        mean_mdp += stop(&MethodSpec::mdp(prior, 50.0)) as f64 / runs as f64;
        mean_emp += stop(&MethodSpec::Empirical) as f64 / runs as f64;
    }
    assert!(
        mean_mdp <= mean_emp,
        "mean stop mdp {mean_mdp:.1} vs empirical {mean_emp:.1}"
    );
}
