//! Cell-parallel energy evaluation: one worker against the full pool.
//!
//! Build with `--no-default-features` to time the sequential fallback; with
//! the default `parallel` feature both pool sizes are measured here.

use std::f64::consts::PI;

use checksolve::cellsolve::CellOptions;
use checksolve::model::{uniform_partition, ForcingSpec, ProblemSpec};
use checksolve::partition::{optimize_partition, total_energy, OuterOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn demo() -> ProblemSpec {
    ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::sinusoid(2.0, 3.0 * PI, 0.0)).unwrap()
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    let mut sizes = vec![1];
    if full > 1 {
        sizes.push(full);
    }
    sizes
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{n}-threads"), pool)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn run_in<R: Send>(pool: &rayon::ThreadPool, f: impl FnOnce() -> R + Send) -> R {
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(String, ())> {
    vec![("sequential".to_string(), ())]
}

#[cfg(not(feature = "parallel"))]
fn run_in<R>(_: &(), f: impl FnOnce() -> R) -> R {
    f()
}

fn bench_total_energy(c: &mut Criterion) {
    let spec = demo();
    let opts = CellOptions::default();
    let mut group = c.benchmark_group("total_energy");
    for k in [16usize, 64] {
        let partition = uniform_partition(&spec, k, k, 2.0).unwrap();
        let m = 1000 / k - 1;
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, _| {
                b.iter(|| run_in(&pool, || total_energy(&spec, &partition, m, 2.0, &opts).unwrap().total_energy))
            });
        }
    }
    group.finish();
}

fn bench_optimize(c: &mut Criterion) {
    let spec = demo();
    let opts = OuterOptions {
        multistart: 0,
        ..OuterOptions::default()
    };
    let mut group = c.benchmark_group("optimize_partition");
    group.sample_size(10);
    let k = 32;
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
            b.iter(|| run_in(&pool, || optimize_partition(&spec, k, k, 2.0, 1000 / k - 1, &opts).unwrap().total_energy))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_total_energy, bench_optimize);
criterion_main!(benches);
