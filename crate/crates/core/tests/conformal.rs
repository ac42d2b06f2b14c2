use cmcfol::conformal::{
    bubble, classify, fixture_hash, fixture_table, gauss_residual, gauss_residual_l2, lambda_from_k, planar_k, sup_abs,
    BubbleParams, K_functional, LAMBDA_K_FIXTURE,
};
use cmcfol::sphere::{ScalarField, SphereGrid};
use cmcfol::Error;
use nalgebra::{Rotation3, Unit, Vector3};

fn centered(lambda: f64) -> BubbleParams {
    BubbleParams::new(lambda, [0.0, 0.0]).unwrap()
}

#[test]
fn residual_of_constants() {
    let grid = SphereGrid::shared(12).unwrap();
    assert!(gauss_residual(&ScalarField::zeros(&grid)).unwrap().linf_norm() < 1e-15);
    for c in [-0.7, 0.3, 1.2] {
        let r = gauss_residual(&ScalarField::constant(&grid, c)).unwrap();
        // Δu − 1 + e^{2u} with Δu = 0
        let want = (2.0 * c).exp() - 1.0;
        assert!(r.samples.iter().all(|v| (v - want).abs() < 1e-12), "{c}");
    }
}

#[test]
fn bubbles_solve_the_equation() {
    let grid = SphereGrid::shared(48).unwrap();
    for p in [centered(2.0), BubbleParams::new(1.5, [0.5, -0.3]).unwrap()] {
        let r = gauss_residual_l2(&bubble(&p, &grid)).unwrap();
        assert!(r <= 1e-8, "{p:?}: {r}");
    }
    assert!(bubble(&centered(1.0), &grid).linf_norm() < 1e-15);
}

#[test]
fn bubble_sup_is_log_lambda() {
    let grid = SphereGrid::shared(48).unwrap();
    let u = bubble(&centered(3.0), &grid);
    assert!((sup_abs(&u) - 3f64.ln()).abs() <= 1e-6);
    // the plain node maximum misses the pole
    assert!(u.linf_norm() < 3f64.ln());
}

#[test]
fn k_examples() {
    let grid = SphereGrid::shared(48).unwrap();
    assert!(K_functional(&ScalarField::zeros(&grid)) < 1e-15);
    let want = ((1.0 + 16.0 * 2f64.ln() - 16.0) / 9.0).abs();
    assert!((K_functional(&bubble(&centered(2.0), &grid)) - want).abs() < 1e-8);
    assert!((want - 0.434405).abs() < 1e-6);
    assert!((planar_k(2.0) - want).abs() < 1e-13);
}

#[test]
fn k_is_rotation_invariant() {
    let grid = SphereGrid::shared(32).unwrap();
    let u = bubble(&BubbleParams::new(2.0, [0.4, 0.1]).unwrap(), &grid);
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8)), 1.1);
    // rotate the band-limited expansion exactly
    let rotated = ScalarField::from_fn(&grid, |x| {
        let y = r * Vector3::from(x);
        u.eval_at([y[0], y[1], y[2]])
    });
    assert!((K_functional(&rotated) - K_functional(&u)).abs() <= 1e-10);
}

#[test]
fn off_center_bubbles_are_rotated_dilations() {
    let grid = SphereGrid::shared(48).unwrap();
    for y0 in [[1.0, -0.5], [0.3, 0.0], [-1.2, 1.5]] {
        let p = BubbleParams::new(2.0, y0).unwrap();
        let le = p.effective_lambda();
        let k = K_functional(&bubble(&p, &grid));
        assert!((k - K_functional(&bubble(&centered(le), &grid))).abs() <= 1e-8);
        assert!((k - planar_k(sup_abs(&bubble(&p, &grid)).exp())).abs() <= 1e-8);
    }
}

#[test]
fn literal_translation_invariance_does_not_hold() {
    let grid = SphereGrid::shared(48).unwrap();
    let k0 = K_functional(&bubble(&centered(2.0), &grid));
    let k1 = K_functional(&bubble(&BubbleParams::new(2.0, [1.0, -0.5]).unwrap(), &grid));
    assert!((k1 - k0).abs() > 0.1, "{k0} {k1}");
}

#[test]
fn lambda_round_trip() {
    let grid = SphereGrid::shared(48).unwrap();
    assert_eq!(lambda_from_k(0.0).unwrap(), 1.0);
    for l in [1.5, 2.0, 3.0, 5.0] {
        let k = K_functional(&bubble(&centered(l), &grid));
        assert!((lambda_from_k(k).unwrap() - l).abs() <= 1e-6, "{l}");
    }
}

#[test]
fn range_errors() {
    assert!(matches!(lambda_from_k(-0.1), Err(Error::Range { .. })));
    assert!(matches!(lambda_from_k(1.0), Err(Error::Range { .. })));
    assert!(matches!(lambda_from_k(f64::NAN), Err(Error::Range { .. })));
    assert!(matches!(BubbleParams::new(0.5, [0.0, 0.0]), Err(Error::Range { .. })));
    assert!(matches!(BubbleParams::new(2.0, [f64::INFINITY, 0.0]), Err(Error::Config(_))));
}

#[test]
fn fixture_is_monotone_and_matches_the_integral() {
    let rows = fixture_table().unwrap();
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0].0, 1.0);
    assert!((rows[rows.len() - 1].0 - 8.0).abs() < 1e-12);
    let inside: Vec<_> = rows.iter().filter(|r| r.0 <= 5.0).collect();
    assert!(inside.windows(2).all(|w| w[1].1 > w[0].1));
    for (l, k) in &rows {
        assert!((planar_k(*l) - k).abs() < 1e-12, "{l}");
    }
    let hash = fixture_hash();
    assert_eq!(hash.len(), 64);
    assert!(!LAMBDA_K_FIXTURE.is_empty());
}

#[test]
fn classification_is_consistent_near_bubbles() {
    let grid = SphereGrid::shared(48).unwrap();
    let y30 = ScalarField::harmonic(&grid, 3, 0);
    for (p, eps) in [(centered(2.0), 0.0), (centered(3.0), 1e-3), (BubbleParams::new(1.5, [0.2, 0.4]).unwrap(), 1e-3)] {
        let u = bubble(&p, &grid).add(&y30.scale(eps));
        let c = classify(&u).unwrap();
        let lk = c.lambda_k.unwrap();
        assert!((c.lambda_sup - lk).abs() <= 10.0 * c.residual_l2 + 1e-4, "{p:?}: {c:?}");
    }
}
