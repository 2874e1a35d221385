use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eqspeed_core::measures::preimage_measure_sampled;
use eqspeed_core::polysolve::DEFAULT_BUDGET;
use eqspeed_core::{green_u, parse_map, preimage_tree, roots, SpherePoint};
use num_complex::Complex64;
use std::hint::black_box;

fn bench_roots(c: &mut Criterion) {
    let mut g = c.benchmark_group("roots");
    for deg in [4usize, 16, 64] {
        // z^deg - 1 perturbed off the symmetric configuration
        let mut coeffs = vec![Complex64::new(0.0, 0.0); deg + 1];
        coeffs[0] = Complex64::new(1.0, 0.0);
        coeffs[1] = Complex64::new(0.01, 0.02);
        coeffs[deg] = Complex64::new(-1.0, 0.3);
        g.bench_with_input(BenchmarkId::from_parameter(deg), &coeffs, |b, p| b.iter(|| roots(black_box(p)).unwrap()));
    }
    g.finish();
}

fn bench_tree(c: &mut Criterion) {
    let f = parse_map("quadratic -0.12+0.75i").unwrap();
    let a = SpherePoint::from_re_im(0.3, 0.1);
    let mut g = c.benchmark_group("preimage_tree");
    g.sample_size(10);
    for n in [8usize, 12, 14] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| preimage_tree(&f, black_box(&a), n, DEFAULT_BUDGET).unwrap())
        });
    }
    g.finish();
}

fn bench_sampled(c: &mut Criterion) {
    let f = parse_map("quadratic i").unwrap();
    let a = SpherePoint::from_re_im(0.4, -0.3);
    c.bench_function("sampled_measure_n20_k1000", |b| {
        b.iter(|| preimage_measure_sampled(&f, black_box(&a), 20, 1000, 1, 0).unwrap())
    });
}

fn bench_green(c: &mut Criterion) {
    let f = parse_map("coeffs p: 1, 0, 0.2, 0 q: 0, 0.5, 0, 1").unwrap();
    let x = SpherePoint::from_re_im(0.7, -0.2);
    c.bench_function("green_u", |b| b.iter(|| green_u(&f, black_box(&x), 1e-13).unwrap()));
}

criterion_group!(benches, bench_roots, bench_tree, bench_sampled, bench_green);
criterion_main!(benches);
