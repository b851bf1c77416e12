use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modgrad::linalg::{eigen_all, integrate_adaptive};
use modgrad::{Expression, SymMatrix};

fn jacobi(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi");
    for n in [2, 3, 6, 10] {
        let m = SymMatrix::from_upper(n, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { n as f64 } else { 0.0 }
        });
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| eigen_all(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn autodiff(c: &mut Criterion) {
    let e = Expression::parse(
        "96*x2 - 84*x2^2 + 28*x2^3 - 3*x2^4 - 10*(x1-2)^2 + sin(x1*x2)",
        2,
        false,
    )
    .unwrap();
    let x = [1.3, 2.7];
    c.bench_function("expr/eval", |b| b.iter(|| e.eval(black_box(&x), None).unwrap()));
    c.bench_function("expr/grad", |b| b.iter(|| e.grad(black_box(&x), None).unwrap()));
    c.bench_function("expr/hessian", |b| b.iter(|| e.hessian(black_box(&x), None).unwrap()));
}

fn quadrature(c: &mut Criterion) {
    c.bench_function("simpson/(t+1)^-1.1 on [0, 1e4]", |b| {
        b.iter(|| integrate_adaptive(|t| (t + 1.0).powf(-1.1), 0.0, black_box(1e4), 1e-10).unwrap())
    });
}

criterion_group!(benches, jacobi, autodiff, quadrature);
criterion_main!(benches);
