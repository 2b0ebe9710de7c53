//! Sequential against parallel execution for the two batch workloads: a
//! parameter sweep of closed-loop runs and a dense fuzzy-system grid.

use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shared_control::parallel::{map, Execution};
use shared_control::sim::sweep::{parse_values, sweep};
use shared_control::sim::ScenarioConfig;
use shared_control::{fis_alpha, FuzzySets, RuleBase};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep_bench(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/case1.scenario");
    let mut cfg = ScenarioConfig::load(&path).expect("bundled scenario");
    cfg.duration = 2.0;
    let values = parse_values("0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45").unwrap();
    let mut group = c.benchmark_group("sweep_fault_plateau");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(black_box(&cfg), "fault.plateau", &values, exec).unwrap())
        });
    }
    group.finish();
}

fn fis_grid_bench(c: &mut Criterion) {
    let sets = FuzzySets::default();
    let rules = RuleBase::default();
    let grid: Vec<(f64, f64)> = (0..=100)
        .flat_map(|i| (0..=100).map(move |j| (i as f64 / 100.0, j as f64 / 100.0)))
        .collect();
    let mut group = c.benchmark_group("fis_grid_101x101");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map(exec, black_box(&grid), |&(y, x)| fis_alpha(y, x, &sets, &rules)))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_bench, fis_grid_bench);
criterion_main!(benches);
