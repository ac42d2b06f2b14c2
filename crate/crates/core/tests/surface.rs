use std::f64::consts::PI;

use cmcfol::hyperbolic::{eval_metric, pullback_metric, Isometry, MetricField};
use cmcfol::solver::random_graph_field;
use cmcfol::sphere::{ScalarField, SphereGrid};
use cmcfol::surface::{
    cmc_residual, fundamental_forms, gauss_checks, graph_norms, hawking_mass, radii, GraphSurface,
};
use cmcfol::Error;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sphere(l: usize, sigma: f64) -> GraphSurface {
    GraphSurface::geodesic_sphere(&SphereGrid::shared(l).unwrap(), Isometry::identity(), sigma).unwrap()
}

#[test]
fn geodesic_spheres_are_umbilic() {
    let h = MetricField::hyperbolic();
    for (l, sigmas) in [(16, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]), (32, vec![2.0, 8.0])] {
        for sigma in sigmas {
            let ff = fundamental_forms(&sphere(l, sigma), &h).unwrap();
            let target = -2.0 / f64::tanh(sigma);
            assert!(ff.a_tf_norm.linf_norm() <= 1e-9, "L={l} s={sigma}");
            assert!(ff.h.samples.iter().all(|v| (v - target).abs() <= 1e-10 * target.abs().max(1.0)));
            let area = 4.0 * PI * sigma.sinh().powi(2);
            assert!((ff.area - area).abs() <= 1e-10 * area);
        }
    }
}

#[test]
fn constant_offset_moves_the_radius() {
    let grid = SphereGrid::shared(12).unwrap();
    let s = GraphSurface::new(Isometry::identity(), 4.0, ScalarField::constant(&grid, 0.7)).unwrap();
    let ff = fundamental_forms(&s, &MetricField::hyperbolic()).unwrap();
    let target = -2.0 / f64::tanh(4.7);
    assert!(ff.h.samples.iter().all(|v| (v - target).abs() < 1e-10));
}

#[test]
fn form_invariants_on_a_random_graph() {
    let grid = SphereGrid::shared(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s = GraphSurface::new(Isometry::translation_to([0.2, -0.1, 0.3]), 3.0, random_graph_field(&grid, 5, 0.2, &mut rng))
        .unwrap();
    let metric = MetricField::ads_schwarzschild(1.0).unwrap();
    let ff = fundamental_forms(&s, &metric).unwrap();
    let frame = pullback_metric(&s.center, &metric);
    for n in &ff.nodes {
        let tr = (n.induced_inv * n.second).trace();
        assert!((tr - n.mean_curvature).abs() < 1e-10);
        assert!(n.atf_norm_sq >= -1e-12);
        let g = eval_metric(&frame, n.point).unwrap();
        let v = Vector3::from(n.normal);
        assert!(((v.transpose() * g * v)[0] - 1.0).abs() < 1e-10);
        assert!(n.radial_normal > 0.0);
    }
}

// H of the axisymmetric radial graph r = u(θ) in dr² + sinh²r dΩ², from the
// divergence of the unit normal of the level set r − u = 0 with all θ
// derivatives taken by central differences.
fn level_set_mean_curvature(u: &dyn Fn(f64) -> f64, theta: f64) -> f64 {
    let h = 1e-4;
    let du = |t: f64| (u(t + h) - u(t - h)) / (2.0 * h);
    let w = |t: f64| {
        let s = u(t).sinh();
        (1.0 + du(t).powi(2) / (s * s)).sqrt()
    };
    let flux = |t: f64| t.sin() * du(t) / w(t);
    let div_s = (flux(theta + h) - flux(theta - h)) / (2.0 * h) / theta.sin();
    let (r, g) = (u(theta), du(theta));
    let (s, c) = (r.sinh(), r.cosh());
    let wt = w(theta);
    let div = 2.0 * c / (s * wt) + g * g * c / (s.powi(3) * wt.powi(3)) - div_s / (s * s);
    -div
}

#[test]
fn mean_curvature_matches_level_set_oracle() {
    let grid = SphereGrid::shared(16).unwrap();
    let y10 = ScalarField::harmonic(&grid, 1, 0);
    let c = (3.0 / (4.0 * PI)).sqrt();
    let s = GraphSurface::new(Isometry::identity(), 3.0, y10.scale(0.01)).unwrap();
    let ff = fundamental_forms(&s, &MetricField::hyperbolic()).unwrap();
    let u = |t: f64| 3.0 + 0.01 * c * t.cos();
    let mut worst = 0.0f64;
    for (p, n) in grid.points().iter().zip(&ff.nodes) {
        let theta = p[2].clamp(-1.0, 1.0).acos();
        worst = worst.max((n.mean_curvature - level_set_mean_curvature(&u, theta)).abs());
    }
    assert!(worst < 1e-7, "{worst}");
}

#[test]
fn residual_of_spheres() {
    let s = sphere(12, 4.0);
    let h = MetricField::hyperbolic();
    assert!(cmc_residual(&s, &h, 4.0).unwrap().linf_norm() < 1e-10);
    let r = cmc_residual(&s, &h, 3.0).unwrap();
    let want = -2.0 / f64::tanh(4.0) + 2.0 / f64::tanh(3.0);
    assert!(r.samples.iter().all(|v| (v - want).abs() < 1e-10));
}

#[test]
fn hawking_mass_of_spheres() {
    let m = hawking_mass(&sphere(16, 4.0), &MetricField::hyperbolic()).unwrap();
    assert!(m.abs() < 1e-9, "{m}");
    let ads = MetricField::ads_schwarzschild(1.0).unwrap();
    let m = hawking_mass(&sphere(16, 7.0), &ads).unwrap();
    assert!((m - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn gauss_checks_on_spheres_and_graphs() {
    let h = MetricField::hyperbolic();
    let g = gauss_checks(&sphere(16, 4.0), &h).unwrap();
    assert!(g.gauss_bonnet_defect <= 1e-8 && g.gauss_equation_residual_l2 <= 1e-8);
    let grid = SphereGrid::shared(32).unwrap();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_graph_field(&grid, 6, 0.05, &mut rng);
        assert!(f.linf_norm() <= 0.05 + 1e-12);
        let s = GraphSurface::new(Isometry::identity(), 4.0, f).unwrap();
        let g = gauss_checks(&s, &h).unwrap();
        assert!(g.gauss_bonnet_defect <= 1e-6, "{g:?}");
        assert!(g.gauss_equation_residual_l2 <= 1e-6, "{g:?}");
    }
}

#[test]
fn radii_of_spheres_and_graphs() {
    let h = MetricField::hyperbolic();
    let r = radii(&sphere(16, 4.0), &h).unwrap();
    assert!((r.sigma_a - 4.0).abs() < 1e-12);
    assert!((r.sigma_h.unwrap() - 4.0).abs() < 1e-10);
    assert!((r.r_min - 4.0).abs() < 1e-12 && (r.r_max - 4.0).abs() < 1e-12);

    let grid = SphereGrid::shared(16).unwrap();
    let y20 = ScalarField::harmonic(&grid, 2, 0);
    let s = GraphSurface::new(Isometry::identity(), 4.0, y20.scale(0.1)).unwrap();
    let r = radii(&s, &h).unwrap();
    assert!(r.sigma_h.is_none());
    assert!(r.r_min <= r.r_max);
    let spread = 0.1 * (y20.max() - y20.min());
    assert!((r.r_max - r.r_min - spread).abs() < 1e-12);
    // nodes miss the poles and the equator only slightly
    let c2 = (5.0 / (16.0 * PI)).sqrt();
    assert!(((r.r_max - r.r_min) / (0.3 * c2) - 1.0).abs() < 0.02);
}

#[test]
fn equivariance_under_isometries() {
    let grid = SphereGrid::shared(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = GraphSurface::new(Isometry::identity(), 3.0, random_graph_field(&grid, 4, 0.1, &mut rng)).unwrap();
    let iso = Isometry::boost(0.4, [0.6, 0.0, 0.8]).compose(&Isometry::rotation([0.0, 1.0, 0.0], 0.7));
    let metric = MetricField::ads_schwarzschild(1.0).unwrap();
    let moved = GraphSurface::new(iso.compose(&s.center), s.sigma, s.f.clone()).unwrap();
    let a = fundamental_forms(&moved, &metric).unwrap();
    let b = fundamental_forms(&s, &pullback_metric(&iso, &metric)).unwrap();
    assert!((a.area - b.area).abs() < 1e-8 * a.area);
    assert!(a.h.sub(&b.h).linf_norm() < 1e-8);
    assert!(a.a_tf_norm.sub(&b.a_tf_norm).linf_norm() < 1e-8);
    for (x, y) in a.nodes.iter().zip(&b.nodes) {
        assert!((x.induced - y.induced).amax() < 1e-8 * x.induced.amax());
    }
}

#[test]
fn euclidean_limit_sign() {
    let h = MetricField::hyperbolic();
    for sigma in [0.12, 0.15] {
        let ff = fundamental_forms(&sphere(8, sigma), &h).unwrap();
        let euclid = -2.0 / sigma;
        assert!(ff.h.samples.iter().all(|v| ((v - euclid) / euclid).abs() < 0.01));
    }
    let grid = SphereGrid::shared(8).unwrap();
    assert!(matches!(GraphSurface::geodesic_sphere(&grid, Isometry::identity(), 0.05), Err(Error::Degenerate(_))));
}

#[test]
fn degenerate_graphs_are_rejected() {
    let grid = SphereGrid::shared(8).unwrap();
    let f = ScalarField::harmonic(&grid, 1, 0).scale(2.0);
    assert!(matches!(GraphSurface::new(Isometry::identity(), 0.5, f), Err(Error::Degenerate(_))));
}

#[test]
fn surface_json_round_trip() {
    let grid = SphereGrid::shared(8).unwrap();
    let s = GraphSurface::new(Isometry::boost(0.2, [0.0, 1.0, 0.0]), 3.5, ScalarField::harmonic(&grid, 2, 1).scale(0.1))
        .unwrap();
    let text = s.to_json();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["center"].as_array().map(|a| a.len()), Some(16));
    let back = GraphSurface::from_json(&text).unwrap();
    assert_eq!(back.sigma, s.sigma);
    assert_eq!(back.f.coeffs, s.f.coeffs);
    assert!(back.center.row_major().iter().zip(s.center.row_major()).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn regraph_preserves_the_point_set() {
    let grid = SphereGrid::shared(16).unwrap();
    let q = [0.3, 0.0, -0.2];
    let s = GraphSurface::geodesic_sphere(&grid, Isometry::translation_to(q), 4.0).unwrap();
    let about_origin = s.regraph(&Isometry::identity(), 4.0).unwrap();
    let back = about_origin.regraph(&Isometry::translation_to(q), 4.0).unwrap();
    assert!(back.f.linf_norm() < 1e-6, "{}", back.f.linf_norm());
    let norms = graph_norms(&about_origin);
    assert!(norms.linf > 0.1 && norms.w22_scaled.is_finite());
}
