//! Benchmarks for the per-step hot paths: stake solving, grid wealth
//! updates, posterior updates, and the tilted-likelihood sweep.

use betcs::betting::{solve_lambda_atoms, Atom};
use betcs::predictives::{
    empirical_predictive, etel_predictive, BetaParams, BetaPosterior, BetaPriorSpec, EtelConfig,
    GammaParams, History,
};
use betcs::{BettingConfig, CsStream, MethodSpec, TrueLaw};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::hint::black_box;

fn sample_history(n: usize) -> History {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let law = TrueLaw::Beta { a: 10.0, b: 30.0 };
    History::from_slice(&law.sample_stream(&mut rng, n)).unwrap()
}

fn bench_solve_lambda(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lambda");
    for &n in &[16usize, 64, 256] {
        let history = sample_history(n);
        let atoms: Vec<Atom> = history.atoms();
        group.bench_with_input(BenchmarkId::from_parameter(n), &atoms, |b, atoms| {
            b.iter(|| {
                let sol =
                    solve_lambda_atoms(black_box(atoms), 0.3, 0.95, 1e-10, None).unwrap();
                black_box(sol.lambda)
            })
        });
    }
    group.finish();
}

fn bench_stream_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("stream_step");
    let config = BettingConfig::new(0.1, 0.95, 500).unwrap();
    let law = TrueLaw::Beta { a: 10.0, b: 30.0 };
    group.bench_function("empirical_g500", |b| {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut stream = CsStream::new(&MethodSpec::Empirical, config).unwrap();
        // warm the history so the forecast path is exercised
        for _ in 0..64 {
            stream.step(law.sample(&mut rng)).unwrap();
        }
        b.iter(|| {
            let rec = stream.step(black_box(law.sample(&mut rng))).unwrap();
            black_box(rec.running.width())
        })
    });
    group.finish();
}

fn bench_posterior_update(c: &mut Criterion) {
    let prior = BetaPriorSpec {
        rho: BetaParams { a: 1.0, b: 1.0 },
        nu: GammaParams {
            shape: 1.5,
            rate: 1.0,
        },
    };
    c.bench_function("beta_posterior_update_1000", |b| {
        let mut post = BetaPosterior::from_prior_grid(&prior, 40, 25).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        b.iter(|| {
            post.update(black_box(rng.random()));
        })
    });
}

fn bench_etel_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("etel_predictive");
    let flat = BetaParams { a: 1.0, b: 1.0 };
    for &(n, grid) in &[(64usize, 100usize), (256, 100), (256, 1000)] {
        let history = sample_history(n);
        let config = EtelConfig::retel(grid, flat).unwrap();
        group.bench_with_input(
            BenchmarkId::new("retel", format!("n{n}_g{grid}")),
            &history,
            |b, h| {
                b.iter(|| {
                    let pred = etel_predictive(black_box(h), &config).unwrap().unwrap();
                    black_box(pred.atoms().len())
                })
            },
        );
    }
    group.finish();
}

fn bench_empirical_predictive(c: &mut Criterion) {
    let history = sample_history(512);
    c.bench_function("empirical_predictive_512", |b| {
        b.iter(|| {
            let pred = empirical_predictive(black_box(&history)).unwrap();
            black_box(pred.atoms().len())
        })
    });
}

criterion_group!(
    benches,
    bench_solve_lambda,
    bench_stream_step,
    bench_posterior_update,
    bench_etel_sweep,
    bench_empirical_predictive
);
criterion_main!(benches);
