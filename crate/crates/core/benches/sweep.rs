use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use torus_core::resonance::order_statistics;
use torus_core::sweep::sweep_grid;
use torus_core::{Execution, GridSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn small_sweep(c: &mut Criterion) {
    let spec = GridSpec {
        n1: 8,
        n2: 8,
        eps_list: vec![0.02],
        window: 5_000,
        ..GridSpec::default()
    };
    let mut group = c.benchmark_group("sweep_8x8_T5000");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep_grid(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

fn order_stats(c: &mut Criterion) {
    let rhos = [1e-2, 1e-4, 1e-6];
    let mut group = c.benchmark_group("order_statistics_200");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| order_statistics(200, black_box(&rhos), 1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, small_sweep, order_stats);
criterion_main!(benches);
