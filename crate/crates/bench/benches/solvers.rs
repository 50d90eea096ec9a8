use anyload_bench::{fixture, multipliers};
use anyload_core::dual::{compute_beta_exact, DualConfig, DualSolver, StepRule};
use anyload_core::fastcontrol::{channel_beta, ChannelConfig};
use anyload_core::greedy::{integrate, GreedyConfig};
use anyload_core::oracle::{default_grid_resolution, primal_grid_solve};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn beta(c: &mut Criterion) {
    let mut g = c.benchmark_group("beta");
    for n in [8, 48, 200] {
        let inst = fixture(n, 1.0, 1);
        let mu = multipliers(n);
        g.bench_with_input(BenchmarkId::new("exact", n), &n, |b, _| {
            b.iter(|| compute_beta_exact(black_box(&inst), black_box(&mu)))
        });
        let cfg = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        g.bench_with_input(BenchmarkId::new("channel_deterministic", n), &n, |b, _| {
            b.iter(|| channel_beta(black_box(&inst), black_box(&mu), &cfg, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn dual_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("dual_step");
    for n in [8, 48, 200] {
        let inst = fixture(n, 1.0, 2);
        let config = DualConfig {
            step: StepRule::Smooth,
            max_iters: usize::MAX,
            ..DualConfig::default()
        };
        let mut solver = DualSolver::new(&inst, config).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| solver.step().unwrap()));
    }
    g.finish();
}

fn greedy(c: &mut Criterion) {
    let inst = fixture(48, 1.0, 3);
    let config = GreedyConfig {
        horizon: 10.0,
        ..GreedyConfig::default()
    };
    let x0 = vec![0.5; inst.n()];
    c.bench_function("greedy_integrate_n48_t10", |b| {
        b.iter(|| integrate(black_box(&inst), &x0, &config).unwrap())
    });
}

fn grid_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("grid_oracle");
    g.sample_size(10);
    for n in [2, 3] {
        let inst = fixture(n, 1.0, 4);
        let res = default_grid_resolution(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| primal_grid_solve(black_box(&inst), res).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, beta, dual_step, greedy, grid_oracle);
criterion_main!(benches);
