use cmcfol::hyperbolic::{
    apply_isometry, decay_report, eval_curvature, eval_metric, fibonacci_directions, hyperbolic_metric, log_linear_slope,
    pullback_metric, DerivativeMode, Isometry, MetricField, MetricSpec, PerturbationSpec, Profile,
};
use cmcfol::Error;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn random_point(rng: &mut ChaCha8Rng, r_lo: f64, r_hi: f64) -> [f64; 3] {
    let d = fibonacci_directions(1 + rng.gen_range(0..200));
    let p = *d.last().unwrap();
    let r = rng.gen_range(r_lo..r_hi);
    [r * p[0], r * p[1], r * p[2]]
}

fn random_iso(rng: &mut ChaCha8Rng) -> Isometry {
    let axis = random_point(rng, 1.0, 1.0001);
    let b = Isometry::boost(rng.gen_range(-0.8..0.8), axis);
    let rot = Isometry::rotation(random_point(rng, 1.0, 1.0001), rng.gen_range(-3.0..3.0));
    b.compose(&rot)
}

#[test]
fn hyperbolic_metric_at_unit_x() {
    let g = eval_metric(&MetricField::hyperbolic(), [1.0, 0.0, 0.0]).unwrap();
    let s = 1f64.sinh().powi(2);
    assert!(max_abs(&(g - Matrix3::from_diagonal(&[1.0, s, s].into()))) < 1e-14);
}

#[test]
fn ads_mass_term_at_unit_x() {
    // tangential block sinh²r + (2m/3)/sinh r
    let g = eval_metric(&MetricField::ads_schwarzschild(3.0).unwrap(), [1.0, 0.0, 0.0]).unwrap();
    let t = 1f64.sinh().powi(2) + 2.0 / 1f64.sinh();
    assert!(max_abs(&(g - Matrix3::from_diagonal(&[1.0, t, t].into()))) < 1e-13);
}

#[test]
fn convex_midpoint_is_entrywise_mean() {
    let a = MetricField::hyperbolic();
    let b = MetricField::ads_schwarzschild(2.0).unwrap();
    let mid = MetricField::convex(0.5, a.clone(), b.clone()).unwrap();
    let end0 = MetricField::convex(0.0, a.clone(), b.clone()).unwrap();
    let end1 = MetricField::convex(1.0, a.clone(), b.clone()).unwrap();
    for x in [[2.0, 0.3, -1.0], [0.1, 4.0, 0.2], [-3.0, -3.0, 3.0]] {
        let (ga, gb) = (eval_metric(&a, x).unwrap(), eval_metric(&b, x).unwrap());
        assert!(max_abs(&(eval_metric(&mid, x).unwrap() - 0.5 * (ga + gb))) < 1e-12 * max_abs(&ga));
        assert_eq!(eval_metric(&end0, x).unwrap(), ga);
        assert!(max_abs(&(eval_metric(&end1, x).unwrap() - gb)) <= 1e-15 * max_abs(&gb));
    }
}

#[test]
fn excluded_ball_is_a_domain_error() {
    let m = MetricField::ads_schwarzschild(1.0).unwrap();
    assert!(matches!(eval_metric(&m, [0.1, 0.0, 0.0]), Err(Error::Domain { .. })));
    assert!(matches!(eval_curvature(&m, [0.0, 0.2, 0.0]), Err(Error::Domain { .. })));
}

#[test]
fn hyperbolic_ricci_is_minus_two_g() {
    let h = MetricField::hyperbolic();
    for x in [[0.5, 0.0, 0.0], [1.0, -2.0, 0.5], [4.0, 3.0, -2.0]] {
        let c = eval_curvature(&h, x).unwrap();
        assert!(max_abs(&(c.ricci + 2.0 * c.g)) < 1e-9 * max_abs(&c.g));
        assert!((c.scalar + 6.0).abs() < 1e-10);
    }
}

#[test]
fn ads_scalar_and_radial_ricci() {
    let m = MetricField::ads_schwarzschild(1.0).unwrap();
    // radial direction is ∂_z on the z-axis, with unit length
    let gap = |r: f64| {
        let c = eval_curvature(&m, [0.0, 0.0, r]).unwrap();
        assert!(c.scalar_defect.abs() < 1e-6);
        let radial = c.ricci[(2, 2)] / c.g[(2, 2)];
        radial - (-2.0 - 2.0 / r.sinh().powi(3))
    };
    // the remainder scales like e^{-5r}
    let (g5, g6) = (gap(5.0), gap(6.0));
    let ratio = g5 / g6;
    assert!(g6.abs() < 1e-10 && ratio > 0.5 * 5f64.exp() && ratio < 2.0 * 5f64.exp(), "{g5} {g6}");
}

#[test]
fn finite_difference_ricci_matches_analytic() {
    let exact = MetricField::ads_schwarzschild(1.0).unwrap();
    let fd = exact.clone().with_derivative_mode(DerivativeMode::FiniteDifference { h: 1e-4 });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = random_point(&mut rng, 3.0, 8.0);
        let a = eval_curvature(&exact, x).unwrap();
        let b = eval_curvature(&fd, x).unwrap();
        let rel = max_abs(&(a.delta_ricci - b.delta_ricci)) / max_abs(&a.ricci);
        assert!(rel < 1e-6, "{rel} at {x:?}");
    }
}

#[test]
fn scalar_is_trace_of_ricci() {
    let spec = PerturbationSpec { beta: 2.6, amplitude: 0.3, seed: 5, lmax: 4, profile: Profile::Random };
    let m = MetricField::perturbed(MetricField::ads_schwarzschild(1.0).unwrap(), spec).unwrap();
    for x in [[2.0, 0.5, 0.1], [-1.0, 3.0, 2.0]] {
        let c = eval_curvature(&m, x).unwrap();
        let tr = (c.g_inv * c.ricci).trace();
        assert!((tr - c.scalar).abs() < 1e-9);
        assert!(max_abs(&(c.ricci - c.ricci.transpose())) < 1e-10);
    }
}

#[test]
fn boost_moves_origin() {
    let p = apply_isometry(&Isometry::boost(0.7, [1.0, 0.0, 0.0]), [0.0; 3]);
    assert!((p[0] - 0.7).abs() < 1e-14 && p[1].abs() < 1e-14 && p[2].abs() < 1e-14);
    let q = [0.2, -1.0, 3.0];
    assert_eq!(apply_isometry(&Isometry::identity(), q), q);
}

#[test]
fn group_action_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (a, b) = (random_iso(&mut rng), random_iso(&mut rng));
        let p = random_point(&mut rng, 0.0, 3.0);
        let lhs = apply_isometry(&a.compose(&b), p);
        let rhs = apply_isometry(&a, apply_isometry(&b, p));
        for i in 0..3 {
            assert!((lhs[i] - rhs[i]).abs() < 1e-10 * (1.0 + lhs[i].abs()));
        }
        assert!(a.compose(&b).lorentz_defect() < 1e-12);
        assert!(a.inverse().lorentz_defect() < 1e-12);
    }
}

#[test]
fn pullback_of_hyperbolic_is_hyperbolic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let iso = random_iso(&mut rng);
    let pulled = pullback_metric(&iso, &MetricField::hyperbolic());
    for _ in 0..50 {
        let x = random_point(&mut rng, 0.1, 4.0);
        let h = hyperbolic_metric(x);
        assert!(max_abs(&(eval_metric(&pulled, x).unwrap() - h)) < 1e-9 * max_abs(&h));
    }
}

#[test]
fn pullback_by_identity_is_identical() {
    let m = MetricField::ads_schwarzschild(1.0).unwrap();
    let pulled = pullback_metric(&Isometry::identity(), &m);
    for x in [[2.0, 0.0, 1.0], [0.0, -3.0, 0.5]] {
        assert!(max_abs(&(eval_metric(&pulled, x).unwrap() - eval_metric(&m, x).unwrap())) < 1e-12);
    }
}

#[test]
fn scalar_curvature_survives_boost() {
    let m = MetricField::ads_schwarzschild(1.0).unwrap();
    let iso = Isometry::boost(0.3, [1.0, 0.0, 0.0]);
    let pulled = pullback_metric(&iso, &m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = random_point(&mut rng, 2.0, 6.0);
        let s = eval_curvature(&pulled, x).unwrap().scalar;
        let s0 = eval_curvature(&m, apply_isometry(&iso, x)).unwrap().scalar;
        assert!((s + 6.0).abs() < 1e-5);
        assert!((s - s0).abs() < 1e-5 * s0.abs());
    }
}

#[test]
fn decay_exponents() {
    let radii = [4.0, 6.0, 8.0];
    let zero = decay_report(&MetricField::hyperbolic(), &radii).unwrap();
    assert!(zero.iter().all(|r| r.deviation == 0.0 && r.ricci_deviation.abs() < 1e-9 && r.scalar_defect.abs() < 1e-9));

    let ads = decay_report(&MetricField::ads_schwarzschild(1.0).unwrap(), &radii).unwrap();
    let slope = log_linear_slope(&radii, &ads.iter().map(|r| r.deviation).collect::<Vec<_>>());
    assert!((slope + 3.0).abs() < 0.1, "{slope}");

    let spec = PerturbationSpec { beta: 2.6, amplitude: 0.5, seed: 1, lmax: 4, profile: Profile::Axisymmetric };
    let pert = MetricField::perturbed(MetricField::hyperbolic(), spec).unwrap();
    let rows = decay_report(&pert, &radii).unwrap();
    let slope = log_linear_slope(&radii, &rows.iter().map(|r| r.deviation).collect::<Vec<_>>());
    assert!((slope + 2.6).abs() < 0.1, "{slope}");
}

#[test]
fn metric_spec_round_trip_and_rejection() {
    let text = r#"{"kind": "perturbed", "base": {"kind": "ads_schwarzschild", "m": 1.0},
        "perturbation": {"beta": 2.6, "amplitude": 0.1, "seed": 4, "lmax": 4}}"#;
    let spec = MetricSpec::from_json(text).unwrap();
    let m = spec.build().unwrap();
    let again = m.to_spec().build().unwrap();
    let x = [2.0, 1.0, -0.5];
    assert_eq!(eval_metric(&m, x).unwrap(), eval_metric(&again, x).unwrap());
    assert!(MetricSpec::from_json(r#"{"kind": "ads_schwarzschild", "mass": 1.0}"#).is_err());
}
