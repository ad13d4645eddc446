use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finalsplit::dgp::{self, DgpKind};
use finalsplit::experiments::{run_suite_with, smoke_grid, Method};
use finalsplit::{fit_forest_with, Execution, ForestConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn forest(c: &mut Criterion) {
    let ds = dgp::sample(&DgpKind::Friedman1.into(), 2000, 1).dataset;
    let cfg = ForestConfig { n_trees: 32, seed: 3, ..ForestConfig::default() };
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| fit_forest_with(black_box(&ds), &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn suite(c: &mut Criterion) {
    let mut grid = smoke_grid(0, &Method::DIRECT);
    grid.retain(|s| s.dgp.kind == DgpKind::Ball && s.max_depth == 4);
    for s in &mut grid {
        s.n = 2000;
        s.replicates = 4;
    }
    let mut group = c.benchmark_group("replicate_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_suite_with(black_box(&grid), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, forest, suite);
criterion_main!(benches);
