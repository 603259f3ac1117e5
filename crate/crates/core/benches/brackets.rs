//! Multi-start searches on the default rayon pool versus a single worker.
//! Build with `--no-default-features` to time the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regop::cp::{sp_op_norm_lower, SearchBudget};
use regop::linalg::PExponent;
use regop::random::{random_block, random_map, seeded};
use regop::regular::{regular_lower, RegularOptions};
use regop::vnorm::{vnorm_lower_with, LowerOptions};

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, rayon::ThreadPool)> {
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    vec![("parallel", pool(0)), ("single_worker", pool(1))]
}

#[cfg(feature = "parallel")]
fn run<R>(mode: &(&str, rayon::ThreadPool), f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    mode.1.install(f)
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, ())> {
    vec![("sequential", ())]
}

#[cfg(not(feature = "parallel"))]
fn run<R>(_: &(&str, ()), f: impl FnOnce() -> R) -> R {
    f()
}

fn brackets(c: &mut Criterion) {
    let p = PExponent::new(3.0).unwrap();
    let mut rng = seeded(1);
    let u = random_map(&mut rng, 2, 2);
    let x = random_block(&mut rng, 3, 3);

    let mut group = c.benchmark_group("multi_start");
    group.sample_size(10);
    for mode in modes() {
        group.bench_function(BenchmarkId::new("vnorm_lower", mode.0), |b| {
            let opts = LowerOptions {
                starts: 8,
                iterations: 100,
                seed: 0,
            };
            b.iter(|| run(&mode, || vnorm_lower_with(&x, p, &opts).0))
        });
        group.bench_function(BenchmarkId::new("sp_op_norm_lower", mode.0), |b| {
            let budget = SearchBudget {
                restarts: 8,
                iterations: 100,
                seed: 0,
            };
            b.iter(|| run(&mode, || sp_op_norm_lower(&u, p, &budget).0))
        });
        group.bench_function(BenchmarkId::new("regular_lower", mode.0), |b| {
            let opts = RegularOptions {
                levels: 2,
                starts: 4,
                iterations: 50,
                ..RegularOptions::default()
            };
            b.iter(|| run(&mode, || regular_lower(&u, p, &opts).best))
        });
    }
    group.finish();
}

criterion_group!(benches, brackets);
criterion_main!(benches);
