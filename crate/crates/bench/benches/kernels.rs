use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use cmcfol::conformal::{bubble, BubbleParams, K_functional};
use cmcfol::hyperbolic::curvature::eval_curvature;
use cmcfol::invariants::mass_charge;
use cmcfol::solver::{newton_solve, SolveOptions};
use cmcfol::sphere::{ScalarField, SphereGrid};
use cmcfol::stability::assemble;
use cmcfol::surface::fundamental_forms;
use cmcfol_bench::ads_sphere;

fn transforms(c: &mut Criterion) {
    let grid = SphereGrid::shared(32).unwrap();
    let f = ScalarField::from_fn(&grid, |p| (p[0] + 2.0 * p[1] * p[2]).exp());
    c.bench_function("analyze L=32", |b| b.iter(|| grid.analyze(black_box(&f.samples)).unwrap()));
    c.bench_function("synthesize L=32", |b| b.iter(|| grid.synthesize(black_box(&f.coeffs)).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let (metric, surface) = ads_sphere(32, 4.0);
    c.bench_function("curvature point", |b| b.iter(|| eval_curvature(&metric, black_box([1.0, 2.0, 3.0])).unwrap()));
    c.bench_function("fundamental forms L=32", |b| b.iter(|| fundamental_forms(black_box(&surface), &metric).unwrap()));
    c.bench_function("mass charge r=8", |b| b.iter(|| mass_charge(&metric, black_box(8.0)).unwrap()));
}

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operators");
    g.sample_size(10);
    let (metric, surface) = ads_sphere(16, 4.0);
    g.bench_function("stability assembly L=16", |b| b.iter(|| assemble(black_box(&surface), &metric).unwrap()));
    let opts = SolveOptions { degree: 16, check_jacobian: false, ..SolveOptions::default() };
    g.bench_function("newton solve L=16", |b| b.iter(|| newton_solve(&metric, 4.0, black_box(&surface), &opts).unwrap()));
    g.finish();
}

fn conformal(c: &mut Criterion) {
    let grid = SphereGrid::shared(48).unwrap();
    let p = BubbleParams::new(3.0, [0.0, 0.0]).unwrap();
    c.bench_function("bubble + K L=48", |b| b.iter(|| K_functional(&bubble(black_box(&p), &grid))));
}

criterion_group!(benches, transforms, geometry, operators, conformal);
criterion_main!(benches);
