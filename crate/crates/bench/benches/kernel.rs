use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mtt_bench::{binop, num};
use mtt_core::driver::prelude;
use mtt_core::{Context, Kernel};

fn normalize(c: &mut Criterion) {
    let env = prelude();
    let mut g = c.benchmark_group("normalize");
    for n in [10, 50, 100] {
        let t = binop("mult", num(n / 10), num(n));
        g.bench_with_input(BenchmarkId::new("mult", n), &t, |b, t| {
            b.iter(|| Kernel::new(env).normalize(black_box(t)).unwrap())
        });
    }
    g.finish();
}

fn conversion(c: &mut Criterion) {
    let env = prelude();
    let mut g = c.benchmark_group("conversion");
    for n in [5, 10, 20] {
        let lhs = binop("mult", num(n), num(n));
        let rhs = num(n * n);
        g.bench_with_input(BenchmarkId::new("mult_square", n), &(lhs, rhs), |b, (l, r)| {
            b.iter(|| assert!(Kernel::new(env).is_def_eq(black_box(l), black_box(r)).unwrap()))
        });
    }
    g.finish();
}

fn inference(c: &mut Criterion) {
    let env = prelude();
    let t = binop("plus", binop("mult", num(3), num(4)), num(5));
    c.bench_function("infer/arith", |b| b.iter(|| Kernel::new(env).infer(&Context::new(), black_box(&t)).unwrap()));
}

criterion_group!(benches, normalize, conversion, inference);
criterion_main!(benches);
