//! Hyperbolic 3-space in the global chart, asymptotically hyperbolic metric
//! families and their curvature, and the Lorentz isometry group.

pub mod curvature;
pub mod isometry;
pub mod jet;
pub mod metric;

pub use curvature::{christoffels, eval_curvature, CurvatureSample};
pub use isometry::{distance, from_hyperboloid, hyperboloid, minkowski_dot, Isometry};
pub use metric::{
    eval_metric, hyperbolic_metric, pullback_metric, DerivativeMode, MetricField, MetricKind, MetricSpec,
    PerturbationSpec, Profile,
};

use crate::error::Result;

/// Image of a chart point under an isometry.
pub fn apply_isometry(iso: &Isometry, p: [f64; 3]) -> [f64; 3] {
    iso.apply(p)
}

/// One row of [`decay_report`]; norms are taken in the reference metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub r: f64,
    pub deviation: f64,
    pub deviation_gradient: f64,
    pub ricci_deviation: f64,
    pub scalar_defect: f64,
}

/// Roughly uniform directions on the unit sphere (Fibonacci lattice).
pub fn fibonacci_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Decay of g − h, its covariant derivative, Ric − Ric_h and S + 6, each
/// maximized over a fixed set of 64 directions.
pub fn decay_report(metric: &MetricField, radii: &[f64]) -> Result<Vec<DecayRow>> {
    let dirs = fibonacci_directions(64);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut row = DecayRow { r, deviation: 0.0, deviation_gradient: 0.0, ricci_deviation: 0.0, scalar_defect: 0.0 };
        for d in &dirs {
            let x = [r * d[0], r * d[1], r * d[2]];
            let e = metric.deviation(x)?;
            let c = curvature::curvature_from_deviation(x, &e)?;
            let h = hyperbolic_metric(x);
            let hi = h.try_inverse().expect("reference metric is invertible");
            let gam = curvature::reference_christoffels(x);
            let mut de = [[[0.0; 3]; 3]; 3];
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut s = e.d[k][i][j];
                        for l in 0..3 {
                            s -= gam[l][k][i] * e.v[l][j] + gam[l][k][j] * e.v[i][l];
                        }
                        de[k][i][j] = s;
                    }
                }
            }
            let em = c.e;
            let n2 = (hi * em * hi).component_mul(&em).sum();
            let r2 = (hi * c.delta_ricci * hi).component_mul(&c.delta_ricci).sum();
            let mut g2 = 0.0;
            for k in 0..3 {
                for kk in 0..3 {
                    for i in 0..3 {
                        for ii in 0..3 {
                            for j in 0..3 {
                                for jj in 0..3 {
                                    g2 += hi[(k, kk)] * hi[(i, ii)] * hi[(j, jj)] * de[k][i][j] * de[kk][ii][jj];
                                }
                            }
                        }
                    }
                }
            }
            row.deviation = row.deviation.max(n2.max(0.0).sqrt());
            row.deviation_gradient = row.deviation_gradient.max(g2.max(0.0).sqrt());
            row.ricci_deviation = row.ricci_deviation.max(r2.max(0.0).sqrt());
            row.scalar_defect = row.scalar_defect.max(c.scalar_defect.abs());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Least-squares slope of ln(values) against `xs`.
pub fn log_linear_slope(xs: &[f64], values: &[f64]) -> f64 {
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_slope(xs, &ys)
}

/// Least-squares slope of ys against xs.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
