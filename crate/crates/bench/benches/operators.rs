use chamberflow::transfer::{
    assemble_factor_operator, assemble_product_operator, fredholm_det, CollocationBasis, MultiParameter,
};
use chamberflow_bench::{fractal, fractal_squared};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

fn assembly(c: &mut Criterion) {
    let f = fractal();
    let mut group = c.benchmark_group("assemble_factor_operator");
    for degree in [8, 16, 24, 32] {
        let basis = CollocationBasis::new(&f, degree, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(degree), &basis, |b, basis| {
            b.iter(|| assemble_factor_operator(&f, black_box(Complex64::new(0.8, 2.0)), basis).unwrap())
        });
    }
    group.finish();

    let g = fractal_squared();
    let bases = vec![CollocationBasis::new(g.factor(0), 6, 1.0).unwrap(); 2];
    let s = MultiParameter::real(&[0.6, 1.1]);
    c.bench_function("assemble_product_operator/6", |b| {
        b.iter(|| assemble_product_operator(&g, black_box(&s), &bases).unwrap())
    });
}

fn determinant(c: &mut Criterion) {
    let f = fractal();
    let mut group = c.benchmark_group("fredholm_det");
    for degree in [16, 24, 32] {
        let basis = CollocationBasis::new(&f, degree, 1.0).unwrap();
        let m = assemble_factor_operator(&f, Complex64::new(1.0, 0.0), &basis).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(degree), &m, |b, m| b.iter(|| fredholm_det(black_box(m)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, determinant);
criterion_main!(benches);
