//! Benchmarks for the stationary solver, the reward engines, and the
//! event-level simulator.

use bribemine_core::*;
use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

fn params() -> StrategyParams {
    StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap()
}

fn bench_solver(c: &mut Criterion) {
    let p = params();
    let mut g = c.benchmark_group("stationary");
    for depth in [32usize, 64, 128] {
        g.bench_function(format!("bssm_solve_k{depth}"), |b| {
            let model = bssm::build_chain(&p, depth).unwrap();
            b.iter(|| solve_stationary(black_box(&model), 1e-12).unwrap());
        });
    }
    g.finish();
}

fn bench_rewards(c: &mut Criterion) {
    let p = params();
    let mut g = c.benchmark_group("rewards");
    for method in [RewardMethod::Reference, RewardMethod::Exact] {
        let opts = AnalysisOptions::default().with_method(method);
        g.bench_function(format!("bssm_accept_{method}"), |b| {
            b.iter(|| bssm::rewards(black_box(&p), Decision::Accept, &opts).unwrap());
        });
        g.bench_function(format!("bsm_accept_{method}"), |b| {
            b.iter(|| bsm::rewards(black_box(&p), Decision::Accept, &opts).unwrap());
        });
    }
    g.finish();
}

fn bench_simulator(c: &mut Criterion) {
    let rounds = 1_000_000u64;
    let mut g = c.benchmark_group("simulate");
    g.throughput(Throughput::Elements(rounds));
    g.sample_size(10);
    for (name, strategy, p) in [
        ("bssm", Strategy::Bssm, params()),
        (
            "bsm",
            Strategy::Bsm,
            StrategyParams::single(0.3, 0.0, 0.5, 0.02, 0.1).unwrap(),
        ),
    ] {
        let cfg = SimConfig {
            params: p,
            strategy,
            accept_flags: vec![Decision::Accept],
            rounds,
            seed: 1,
        };
        g.bench_function(name, |b| b.iter(|| simulate(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_solver, bench_rewards, bench_simulator);
criterion_main!(benches);
