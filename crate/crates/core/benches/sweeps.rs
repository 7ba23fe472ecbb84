use std::hint::black_box;

use affobs_core::analysis::{check_uco_with, equivalence_fleet, random_tabulated_system};
use affobs_core::ltv_system::{rotor, uniform_stability_bound_with};
use affobs_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn uco_sweep(c: &mut Criterion) {
    let sys = rotor();
    let mut g = c.benchmark_group("uco_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| check_uco_with(&sys, 2.0, black_box(16.0), 1e-3, exec).unwrap())
        });
    }
    g.finish();
}

fn stability_bound(c: &mut Criterion) {
    let sys = random_tabulated_system(7, 3, true, 20.0);
    let mut g = c.benchmark_group("stability_bound");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| uniform_stability_bound_with(&sys, black_box(20.0), 1e-3, exec).unwrap())
        });
    }
    g.finish();
}

fn equivalence(c: &mut Criterion) {
    let fleet: Vec<_> = (0..16)
        .map(|s| random_tabulated_system(s, 1 + (s as usize) % 3, s % 5 != 4, 5.0))
        .collect();
    let mut g = c.benchmark_group("equivalence_fleet");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| equivalence_fleet(&fleet, black_box(5.0), 1e-2, 1e-8, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, uco_sweep, stability_bound, equivalence);
criterion_main!(benches);
