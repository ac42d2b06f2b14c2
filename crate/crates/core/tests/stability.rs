use std::sync::OnceLock;

use cmcfol::hyperbolic::{Isometry, MetricField};
use cmcfol::solver::{continue_metric, random_graph_field, SolveOptions};
use cmcfol::sphere::{ScalarField, SphereGrid};
use cmcfol::stability::{
    assemble, canonical_partition, check_controlled_instability, low_spectrum, SpectrumRow,
};
use cmcfol::surface::GraphSurface;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts(l: usize) -> SolveOptions {
    SolveOptions { degree: l, ..SolveOptions::default() }
}

fn ads_leaf(m: f64) -> &'static GraphSurface {
    static POS: OnceLock<GraphSurface> = OnceLock::new();
    static NEG: OnceLock<GraphSurface> = OnceLock::new();
    let cell = if m > 0.0 { &POS } else { &NEG };
    cell.get_or_init(|| {
        let metric = MetricField::ads_schwarzschild(m).unwrap();
        continue_metric(&metric, 5.0, 4, &opts(16)).unwrap()
    })
}

fn sphere(l: usize, sigma: f64) -> GraphSurface {
    GraphSurface::geodesic_sphere(&SphereGrid::shared(l).unwrap(), Isometry::identity(), sigma).unwrap()
}

#[test]
fn geodesic_sphere_spectrum() {
    let sigma = 4.0f64;
    let op = assemble(&sphere(12, sigma), &MetricField::hyperbolic()).unwrap();
    let spec = low_spectrum(&op, 9).unwrap();
    let s2 = sigma.sinh().powi(2);
    let want = [-2.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0, 4.0];
    for (v, w) in spec.eigenvalues.iter().zip(want) {
        assert!((v * s2 - w).abs() <= 1e-9 * w.abs().max(1.0), "{} vs {w}", v * s2);
    }
    for (lam, r) in spec.eigenvalues.iter().zip(&spec.residuals) {
        assert!(*r <= 1e-8 * lam.abs() + 1e-12, "{r}");
    }
    for (i, a) in spec.eigenfields.iter().enumerate() {
        for (j, b) in spec.eigenfields.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((op.inner(a, b) - want).abs() < 1e-8);
        }
    }
}

#[test]
fn ads_potential_is_rotationally_symmetric() {
    let op = assemble(&sphere(12, 4.0), &MetricField::ads_schwarzschild(1.0).unwrap()).unwrap();
    let p = &op.potential.samples;
    let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo <= 1e-10 * hi.abs().max(1.0));
}

#[test]
fn assembly_is_symmetric_and_self_adjoint() {
    let grid = SphereGrid::shared(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s = GraphSurface::new(Isometry::translation_to([0.1, 0.2, 0.0]), 4.0, random_graph_field(&grid, 6, 0.1, &mut rng))
        .unwrap();
    let metric = MetricField::ads_schwarzschild(1.0).unwrap();
    let op = assemble(&s, &metric).unwrap();
    assert!(op.symmetry_defect <= 1e-12, "{}", op.symmetry_defect);
    let f = random_graph_field(&grid, 12, 1.0, &mut rng);
    let g = random_graph_field(&grid, 12, 1.0, &mut rng);
    let jf = op.apply(&f).unwrap();
    let jg = op.apply(&g).unwrap();
    let gap = (op.inner(&jf, &g) - op.inner(&f, &jg)).abs();
    let norms = op.inner(&f, &f).sqrt() * op.inner(&g, &g).sqrt();
    assert!(gap <= 1e-9 * norms, "{gap} vs {norms}");
}

#[test]
fn solved_leaf_eigenvalue_law() {
    let leaf = ads_leaf(1.0);
    let op = assemble(leaf, &MetricField::ads_schwarzschild(1.0).unwrap()).unwrap();
    let spec = low_spectrum(&op, 5).unwrap();
    let s = leaf.sigma.sinh();
    for k in 1..4 {
        let scaled = spec.eigenvalues[k] * s.powi(3) / 6.0;
        assert!((scaled - 1.0).abs() <= 0.1, "lambda_{k}: {scaled}");
    }
    let band = 1.5 / (s * s);
    assert!(spec.eigenvalues[0] <= -band);
    assert!(spec.eigenvalues[4] >= band);
    assert_eq!(spec.count_in(f64::NEG_INFINITY, -1.0 / (s * s)), 1);
    assert_eq!(spec.count_in(-band, band), 3);
    let row = SpectrumRow::from_operator(&op).unwrap();
    assert!((row.hawking_term * s.powi(3) / 6.0 - 1.0).abs() < 0.05);
}

#[test]
fn past_mass_flips_the_sign_of_the_boost_eigenvalues() {
    let leaf = ads_leaf(-1.0);
    let metric = MetricField::ads_schwarzschild(-1.0).unwrap();
    let op = assemble(leaf, &metric).unwrap();
    let spec = low_spectrum(&op, 4).unwrap();
    let s = leaf.sigma.sinh();
    for k in 1..4 {
        assert!(spec.eigenvalues[k] < 0.0);
        assert!((spec.eigenvalues[k] * s.powi(3) / 6.0 + 1.0).abs() <= 0.15);
    }
    let alpha = -3.0 / (s * s);
    let ci = check_controlled_instability(leaf, &metric, alpha).unwrap();
    assert!(ci.satisfied, "{ci:?}");
}

#[test]
fn canonical_partition_on_spheres() {
    let s = sphere(10, 4.0);
    let op = assemble(&s, &MetricField::hyperbolic()).unwrap();
    let x = ScalarField::from_fn(s.grid(), |p| p[0]);
    let part = canonical_partition(&x, &op).unwrap();
    assert!(part.boost_part.sub(&x).linf_norm() < 1e-10);
    assert!(part.deform_part.linf_norm() < 1e-10);
    let c = ScalarField::constant(s.grid(), 1.0);
    assert!(canonical_partition(&c, &op).unwrap().boost_part.linf_norm() < 1e-10);
}

#[test]
fn canonical_partition_is_orthogonal_on_a_leaf() {
    let leaf = ads_leaf(1.0);
    let op = assemble(leaf, &MetricField::ads_schwarzschild(1.0).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = random_graph_field(leaf.grid(), 8, 1.0, &mut rng);
    let part = canonical_partition(&f, &op).unwrap();
    let cross = op.inner(&part.boost_part, &part.deform_part);
    assert!(cross.abs() <= 1e-9 * op.inner(&f, &f), "{cross}");
}

#[test]
fn controlled_instability_on_spheres() {
    let sigma = 4.0f64;
    let s2 = sigma.sinh().powi(2);
    let h = MetricField::hyperbolic();
    let s = sphere(10, sigma);
    let ok = check_controlled_instability(&s, &h, -3.0 / s2).unwrap();
    assert!(ok.satisfied);
    assert!(ok.lambda_min_meanzero.abs() * s2 < 1e-9);
    assert!(!check_controlled_instability(&s, &h, 1.0 / s2).unwrap().satisfied);
}

#[test]
fn controlled_instability_on_a_leaf() {
    let leaf = ads_leaf(1.0);
    let s2 = leaf.sigma.sinh().powi(2);
    let ci = check_controlled_instability(leaf, &MetricField::ads_schwarzschild(1.0).unwrap(), -3.0 / s2).unwrap();
    assert!(ci.satisfied);
}

#[test]
fn boost_eigenvalue_scaling_across_sigma() {
    let metric = MetricField::ads_schwarzschild(1.0).unwrap();
    let scaled: Vec<f64> = [4.0f64, 5.0, 6.0]
        .iter()
        .map(|&sigma| {
            let leaf = continue_metric(&metric, sigma, 4, &opts(12)).unwrap();
            let spec = low_spectrum(&assemble(&leaf, &metric).unwrap(), 2).unwrap();
            spec.eigenvalues[1] * sigma.sinh().powi(3)
        })
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo <= 1.15, "{scaled:?}");
}
