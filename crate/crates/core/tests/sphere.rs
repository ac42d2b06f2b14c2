use std::collections::BTreeSet;
use std::f64::consts::PI;

use cmcfol::sphere::{basis_at, lm_index, ScalarField, SphereGrid};
use cmcfol::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_coeffs(n: usize, lmax: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = (lmax + 1) * (lmax + 1);
    (0..n).map(|i| if i < k { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect()
}

#[test]
fn grid_sizes_respect_dealiasing() {
    for l in [8, 16, 32] {
        let g = SphereGrid::new(l).unwrap();
        assert!(g.n_lat >= (3 * (l + 1)).div_ceil(2));
        assert!(g.n_lon >= 3 * l + 1);
    }
    assert!(SphereGrid::with_sizes(16, 10, 60).is_err());
}

#[test]
fn constant_and_y10_coefficients() {
    let grid = SphereGrid::shared(12).unwrap();
    let one = grid.analyze(&vec![1.0; grid.n_nodes()]).unwrap();
    assert!((one[0] - (4.0 * PI).sqrt()).abs() < 1e-13);
    assert!(one[1..].iter().all(|c| c.abs() < 1e-13));
    let y10 = ScalarField::harmonic(&grid, 1, 0);
    let c = grid.analyze(&y10.samples).unwrap();
    for (i, v) in c.iter().enumerate() {
        let want = if i == lm_index(1, 0) { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-13);
    }
}

#[test]
fn round_trip_and_parseval_at_l32() {
    let grid = SphereGrid::shared(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = random_coeffs(grid.n_coeffs(), 32, &mut rng);
    let s = grid.synthesize(&c).unwrap();
    let back = grid.analyze(&s).unwrap();
    let err = c.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12, "{err}");
    let quad = grid.integrate_samples(&s.iter().map(|v| v * v).collect::<Vec<_>>());
    let coef: f64 = c.iter().map(|v| v * v).sum();
    assert!((quad - coef).abs() <= 1e-10 * coef);
}

#[test]
fn shape_mismatch_is_reported() {
    let grid = SphereGrid::shared(8).unwrap();
    assert!(matches!(grid.analyze(&[1.0; 3]), Err(Error::Shape { .. })));
    assert!(matches!(grid.synthesize(&[1.0; 3]), Err(Error::Shape { .. })));
}

#[test]
fn integrals_and_means() {
    let grid = SphereGrid::shared(10).unwrap();
    assert!((ScalarField::constant(&grid, 1.0).integrate() - 4.0 * PI).abs() < 1e-13);
    assert!((ScalarField::constant(&grid, 3.0).mean() - 3.0).abs() < 1e-13);
    assert!(ScalarField::harmonic(&grid, 2, 1).integrate().abs() < 1e-14);
    let z2 = ScalarField::from_fn(&grid, |p| p[2] * p[2]);
    assert!((z2.integrate() - 4.0 * PI / 3.0).abs() < 1e-13);
}

#[test]
fn quadrature_orthonormality() {
    let l = 16;
    let grid = SphereGrid::shared(l).unwrap();
    let basis: Vec<Vec<f64>> = grid.points().iter().map(|p| basis_at(l, *p)).collect();
    let n = grid.n_coeffs();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let s: f64 = basis.iter().zip(grid.weights()).map(|(y, w)| w * y[a] * y[b]).sum();
            worst = worst.max((s - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn laplacian_eigenvalues() {
    let grid = SphereGrid::shared(12).unwrap();
    for l in 0..=12 {
        for m in [-(l as i64), 0, l as i64] {
            let y = ScalarField::harmonic(&grid, l, m);
            let ly = y.laplace_beltrami();
            let want = -((l * (l + 1)) as f64);
            for (a, b) in ly.coeffs.iter().zip(&y.coeffs) {
                assert!((a - want * b).abs() < 1e-12);
            }
        }
    }
    assert!(ScalarField::constant(&grid, 2.0).laplace_beltrami().linf_norm() < 1e-13);
}

#[test]
fn killing_derivatives_of_coordinates() {
    let grid = SphereGrid::shared(6).unwrap();
    let z = ScalarField::from_fn(&grid, |p| p[2]);
    assert!(z.killing_derivatives()[2].linf_norm() < 1e-13);
    let x = ScalarField::from_fn(&grid, |p| p[0]);
    let lz = &x.killing_derivatives()[2];
    let y = ScalarField::from_fn(&grid, |p| p[1]);
    assert!(lz.sub(&y).linf_norm() < 1e-13);
}

#[test]
fn gradient_from_killing_fields_matches_finite_differences() {
    let grid = SphereGrid::shared(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = ScalarField::from_coeffs(&grid, random_coeffs(grid.n_coeffs(), 10, &mut rng)).unwrap();
    let d = f.killing_derivatives();
    let h = 1e-5;
    for p in [[0.36, -0.48, 0.8], [0.6, 0.0, -0.8], [0.0, 1.0, 0.0]] {
        let lsum: f64 = d.iter().map(|di| di.eval_at(p).powi(2)).sum();
        // tangent frame at p
        let a = if p[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let mut e1 = [a[1] * p[2] - a[2] * p[1], a[2] * p[0] - a[0] * p[2], a[0] * p[1] - a[1] * p[0]];
        let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        e1 = e1.map(|v| v / n);
        let e2 = [p[1] * e1[2] - p[2] * e1[1], p[2] * e1[0] - p[0] * e1[2], p[0] * e1[1] - p[1] * e1[0]];
        let along = |e: [f64; 3], t: f64| {
            let q: [f64; 3] = std::array::from_fn(|k| p[k] * t.cos() + e[k] * t.sin());
            f.eval_at(q)
        };
        let g1 = (along(e1, h) - along(e1, -h)) / (2.0 * h);
        let g2 = (along(e2, h) - along(e2, -h)) / (2.0 * h);
        assert!((lsum - (g1 * g1 + g2 * g2)).abs() < 1e-8 * (1.0 + lsum), "{lsum} vs {}", g1 * g1 + g2 * g2);
    }
}

#[test]
fn band_projection() {
    let grid = SphereGrid::shared(8).unwrap();
    let f = ScalarField::constant(&grid, 1.0)
        .add(&ScalarField::harmonic(&grid, 1, 0))
        .add(&ScalarField::harmonic(&grid, 2, 2));
    let one: BTreeSet<usize> = [1].into();
    let p = f.project_band(&one).unwrap();
    assert!(p.sub(&ScalarField::harmonic(&grid, 1, 0)).linf_norm() < 1e-14);
    assert_eq!(p.project_band(&one).unwrap().coeffs, p.coeffs);
    let rest = f.sub(&p);
    for m in -1..=1 {
        assert!(rest.coeff(1, m).abs() < 1e-15);
    }
    assert!(f.project_band(&[9].into()).is_err());
}

#[test]
fn squaring_does_not_alias() {
    let l = 16;
    let grid = SphereGrid::shared(l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = ScalarField::from_coeffs(&grid, random_coeffs(grid.n_coeffs(), l / 2, &mut rng)).unwrap();
    let norm_sq: f64 = f.coeffs.iter().map(|c| c * c).sum();
    // the product lives in degree ≤ L, and the dealiased quadrature must keep it there
    let sq: Vec<f64> = f.samples.iter().map(|v| v * v).collect();
    let c = grid.analyze(&sq).unwrap();
    let back = grid.synthesize(&c).unwrap();
    let err = sq.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12 * norm_sq, "{err}");
}

#[test]
fn payload_round_trip() {
    let grid = SphereGrid::shared(6).unwrap();
    let f = ScalarField::harmonic(&grid, 3, -2).scale(0.25);
    let text = serde_json::to_string(&f.to_payload()).unwrap();
    assert!(text.contains("\"L\":6"));
    let back = ScalarField::from_payload(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.coeffs, f.coeffs);
}
