//! Sequential vs rayon-parallel Monte Carlo trials, and the two solvers.
//! Run with `--no-default-features` to benchmark the sequential-only build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use wsnalloc::montecarlo::{design, run_trials, Trials};
use wsnalloc::{
    solve_centralized, solve_distributed, Execution, NetworkSpec, Scenario, Scheme, SolverConfig,
};

fn fig1(m: usize, n: usize) -> Scenario {
    let spec = NetworkSpec {
        sensors: m,
        samples: n,
        signal_amplitude: 0.2,
        xi_a_db: Some(-4.0),
        zeta: 0.1,
        sigma2_range: (0.5, 2.0),
        channel_gain: None,
        radius: 0.5,
    };
    Scenario::generate(&spec, 3.0, 1.0, 0.1, 1, SolverConfig::default()).unwrap()
}

fn trials(c: &mut Criterion) {
    let trials = 20_000;
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    group.throughput(Throughput::Elements(2 * trials as u64));
    for (m, n) in [(10, 10), (20, 50)] {
        let sc = fig1(m, n);
        let scheme = Scheme::EdOptWeightsOptPower;
        let (p, w) = design(&sc, scheme).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let id = BenchmarkId::new(format!("{exec:?}"), format!("M{m}_N{n}"));
            group.bench_with_input(id, &exec, |b, &exec| {
                b.iter(|| run_trials(&sc, &p, &w, scheme, Trials::new(trials).exec(exec)).unwrap())
            });
        }
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let sc = fig1(10, 10);
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    group.bench_function("central", |b| b.iter(|| solve_centralized(&sc).unwrap()));
    group.bench_function("distributed", |b| {
        b.iter(|| solve_distributed(&sc).unwrap())
    });
    group.finish();
}

criterion_group!(benches, trials, solvers);
criterion_main!(benches);
