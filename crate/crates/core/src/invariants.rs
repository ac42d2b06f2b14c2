//! Asymptotic invariants: the mass vector in its charge and Ricci forms,
//! hyperbolic centers, the center of mass, the pseudo-center of a graph and
//! the isometries that balance a surface or a metric.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::curvature::{curvature_from_deviation, reference_christoffels};
use crate::hyperbolic::{from_hyperboloid, hyperbolic_metric, hyperboloid, minkowski_dot, pullback_metric, Isometry, MetricField};
use crate::report::csv_float;
use crate::sphere::{SphereGrid, DEFAULT_L};
use crate::surface::{fundamental_forms, GraphSurface};

/// Normalization of the charge integral: the value of the boundary integral
/// for a unit-mass AdS-Schwarzschild metric as r → ∞.
pub const MASS_OMEGA: f64 = 16.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassVersion {
    Charge,
    Ricci,
}

impl MassVersion {
    pub fn name(self) -> &'static str {
        match self {
            MassVersion::Charge => "charge",
            MassVersion::Ricci => "ricci",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Causality {
    TimelikeFuture,
    TimelikePast,
    NullOrSpacelike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    pub components: [f64; 4],
    pub radius_used: f64,
    pub version: MassVersion,
}

pub const MASS_CSV_HEADER: &str = "r,m0,m1,m2,m3,minkowski_norm_sq,version";

impl MassVector {
    /// −m₀² + |m|².
    pub fn minkowski_norm_sq(&self) -> f64 {
        minkowski_dot(&self.components, &self.components)
    }

    pub fn spatial_norm(&self) -> f64 {
        let m = &self.components;
        (m[1] * m[1] + m[2] * m[2] + m[3] * m[3]).sqrt()
    }

    pub fn classification(&self) -> Causality {
        let m0 = self.components[0];
        if self.minkowski_norm_sq() < 0.0 {
            if m0 > 0.0 {
                Causality::TimelikeFuture
            } else {
                Causality::TimelikePast
            }
        } else {
            Causality::NullOrSpacelike
        }
    }

    pub fn to_csv(&self) -> String {
        let m = &self.components;
        format!(
            "{},{},{},{},{},{},{}",
            csv_float(self.radius_used),
            csv_float(m[0]),
            csv_float(m[1]),
            csv_float(m[2]),
            csv_float(m[3]),
            csv_float(self.minkowski_norm_sq()),
            self.version.name()
        )
    }
}

/// The static potentials V₀ = cosh r, Vᵢ = sinh r xᵢ/r and their differentials.
fn potentials(x: [f64; 3]) -> ([f64; 4], [[f64; 3]; 4]) {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let n = [x[0] / r, x[1] / r, x[2] / r];
    let (c, s) = (r.cosh(), r.sinh());
    let mut v = [c, 0.0, 0.0, 0.0];
    let mut dv = [[0.0; 3]; 4];
    for k in 0..3 {
        dv[0][k] = s * n[k];
    }
    for i in 0..3 {
        v[i + 1] = s * n[i];
        for k in 0..3 {
            let delta = if i == k { 1.0 } else { 0.0 };
            dv[i + 1][k] = c * n[i] * n[k] + s / r * (delta - n[i] * n[k]);
        }
    }
    (v, dv)
}

fn check_radius(metric: &MetricField, r: f64) -> Result<()> {
    if !(r > metric.domain_r_min) || !r.is_finite() {
        return Err(Error::Domain { r, r_min: metric.domain_r_min });
    }
    Ok(())
}

/// Mass vector from the boundary charge on the coordinate sphere of radius r.
pub fn mass_charge(metric: &MetricField, r: f64) -> Result<MassVector> {
    mass_charge_on(metric, r, &SphereGrid::shared(DEFAULT_L)?)
}

pub fn mass_charge_on(metric: &MetricField, r: f64, grid: &Arc<SphereGrid>) -> Result<MassVector> {
    check_radius(metric, r)?;
    let area = r.sinh().powi(2);
    let parts: Vec<[f64; 4]> = grid
        .points()
        .par_iter()
        .map(|p| -> Result<[f64; 4]> {
            let x = [r * p[0], r * p[1], r * p[2]];
            let e = metric.deviation(x)?;
            let hi = hyperbolic_metric(x).try_inverse().expect("reference metric is invertible");
            let gam = reference_christoffels(x);
            // ∇_k e_ij
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
            let ev = Matrix3::from_fn(|i, j| e.v[i][j]);
            let tr = (hi * ev).trace();
            let dtr: [f64; 3] = std::array::from_fn(|k| (hi * Matrix3::from_fn(|i, j| de[k][i][j])).trace());
            // (div e)_j = h^{ik} ∇_k e_ij
            let div: [f64; 3] = std::array::from_fn(|j| {
                let mut s = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        s += hi[(i, k)] * de[k][i][j];
                    }
                }
                s
            });
            let n = Vector3::new(p[0], p[1], p[2]);
            let en = ev * n;
            let (v, dv) = potentials(x);
            let mut out = [0.0; 4];
            for mu in 0..4 {
                let dvv = Vector3::from(dv[mu]);
                let grad = hi * dvv;
                let dtr_n: f64 = (0..3).map(|k| dtr[k] * p[k]).sum();
                let div_n: f64 = (0..3).map(|k| div[k] * p[k]).sum();
                out[mu] = tr * dvv.dot(&n) - grad.dot(&en) - v[mu] * dtr_n + v[mu] * div_n;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = [0.0; 4];
    for (q, w) in parts.iter().zip(grid.weights()) {
        for mu in 0..4 {
            m[mu] += w * area * q[mu];
        }
    }
    Ok(MassVector { components: m.map(|v| v / MASS_OMEGA), radius_used: r, version: MassVersion::Charge })
}

/// Mass vector from −(1/8π) ∫ G(∇V_μ, ν) dμ over the coordinate sphere of
/// radius r, with G = Ric − (S/2 + 1) g and ν, dμ taken in g.
pub fn mass_ricci(metric: &MetricField, r: f64) -> Result<MassVector> {
    mass_ricci_on(metric, r, &SphereGrid::shared(DEFAULT_L)?)
}

pub fn mass_ricci_on(metric: &MetricField, r: f64, grid: &Arc<SphereGrid>) -> Result<MassVector> {
    check_radius(metric, r)?;
    let parts: Vec<[f64; 4]> = grid
        .points()
        .par_iter()
        .map(|p| -> Result<[f64; 4]> {
            let x = [r * p[0], r * p[1], r * p[2]];
            let e = metric.deviation(x)?;
            let c = curvature_from_deviation(x, &e)?;
            let hi = hyperbolic_metric(x).try_inverse().expect("reference metric is invertible");
            let n = Vector3::new(p[0], p[1], p[2]);
            let nn = n.dot(&(c.g_inv * n)).sqrt();
            let nu = c.g_inv * n / nn;
            // area element of g on the sphere relative to dΩ: r² |dr|_g √det g
            let dens = r * r * nn * c.g.determinant().sqrt();
            let (_, dv) = potentials(x);
            let mut out = [0.0; 4];
            for mu in 0..4 {
                let xv = hi * Vector3::from(dv[mu]);
                out[mu] = dens * xv.dot(&(c.einstein * nu));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = [0.0; 4];
    for (q, w) in parts.iter().zip(grid.weights()) {
        for mu in 0..4 {
            m[mu] -= w * q[mu] / (8.0 * PI);
        }
    }
    Ok(MassVector { components: m, radius_used: r, version: MassVersion::Ricci })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterReport {
    /// ∫ I dμ.
    pub c_prime: [f64; 4],
    pub center_point: [f64; 3],
    /// Minkowski norm² of c′ (negative when timelike).
    pub defect: f64,
}

/// Which area measure a center integral uses.
#[derive(Debug, Clone, Copy)]
pub enum CenterMeasure<'a> {
    Reference,
    Metric(&'a MetricField),
}

/// Normalized first moment of the hyperboloid position over the surface.
pub fn hyperbolic_center(surface: &GraphSurface, measure: CenterMeasure<'_>) -> Result<CenterReport> {
    let hyp = MetricField::hyperbolic();
    let ff = fundamental_forms(surface, match measure {
        CenterMeasure::Reference => &hyp,
        CenterMeasure::Metric(m) => m,
    })?;
    let mut c = [0.0; 4];
    for (n, w) in ff.nodes.iter().zip(surface.grid().weights()) {
        let i = hyperboloid(surface.center.apply(n.point));
        for mu in 0..4 {
            c[mu] += w * n.area_density * i[mu];
        }
    }
    let defect = minkowski_dot(&c, &c);
    if !(defect < 0.0) || c[0] <= 0.0 {
        return Err(Error::Causal { norm_sq: defect });
    }
    let s = 1.0 / (-defect).sqrt();
    Ok(CenterReport { c_prime: c, center_point: from_hyperboloid(c.map(|v| s * v)), defect })
}

/// The chart point z with I(z) = ±m/√(−|m|²), the sign making the time component positive.
pub fn center_of_mass(mass: &MassVector) -> Result<[f64; 3]> {
    let q = mass.minkowski_norm_sq();
    if !(q < 0.0) {
        return Err(Error::Causal { norm_sq: q });
    }
    let s = mass.components[0].signum() / (-q).sqrt();
    Ok(from_hyperboloid(mass.components.map(|v| s * v)))
}

/// Z^i = ½ ∫ (sinh f̃ cosh f̃ − f̃) p^i dμ over the unit sphere, f̃ = σ + f.
pub fn pseudo_center(surface: &GraphSurface) -> Result<[f64; 3]> {
    if !surface.center.is_identity(1e-12) {
        return Err(Error::Frame);
    }
    let grid = surface.grid();
    let rho = surface.radii_samples();
    let mut z = [0.0; 3];
    for ((p, w), r) in grid.points().iter().zip(grid.weights()).zip(rho) {
        let g = 0.5 * (0.5 * (2.0 * r).sinh() - r);
        for i in 0..3 {
            z[i] += w * g * p[i];
        }
    }
    Ok(z)
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// One iteration of [`balance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceStep {
    pub iteration: usize,
    pub z_norm: f64,
    pub rapidity: f64,
}

#[derive(Debug, Clone)]
pub struct Balanced {
    /// Φ with pseudo-center of Φ(M), graphed about the origin, equal to zero.
    pub isometry: Isometry,
    /// M graphed about Φ⁻¹(0).
    pub surface: GraphSurface,
    pub trace: Vec<BalanceStep>,
}

pub const BALANCE_MAX_ITERATIONS: usize = 30;

/// Tolerance on |Z| used by [`balance`].
pub fn balance_tolerance(sigma: f64) -> f64 {
    1e-8 * sigma.sinh().powi(3)
}

pub fn balance(surface: &GraphSurface) -> Result<Isometry> {
    Ok(balance_with_trace(surface)?.isometry)
}

/// Moves the graphing center by boosts toward the pseudo-center until it vanishes.
pub fn balance_with_trace(surface: &GraphSurface) -> Result<Balanced> {
    if !surface.center.is_identity(1e-12) {
        return Err(Error::Frame);
    }
    let sigma = surface.sigma;
    let tol = balance_tolerance(sigma);
    let mut center = Isometry::identity();
    let mut current = surface.clone();
    let mut z = pseudo_center(&current)?;
    let mut zn = norm3(z);
    let mut trace = vec![BalanceStep { iteration: 0, z_norm: zn, rapidity: 0.0 }];
    // Z ≈ (4π/3) sinh²σ · δ for a small displacement δ of a round sphere
    let gain = 4.0 * PI / 3.0 * sigma.sinh().powi(2);
    let mut iteration = 0;
    while zn > tol {
        iteration += 1;
        if iteration > BALANCE_MAX_ITERATIONS {
            return Err(Error::Stall { halvings: 0, z_norm: zn });
        }
        let dir = [z[0] / zn, z[1] / zn, z[2] / zn];
        let mut t = zn / gain;
        let mut accepted = None;
        for _ in 0..=8 {
            let trial_center = center.compose(&Isometry::boost(t, dir));
            let trial = surface
                .regraph(&trial_center, sigma)
                .map_err(|e| Error::Regraph(e.to_string()))?;
            let framed = GraphSurface { center: Isometry::identity(), ..trial };
            let zt = pseudo_center(&framed)?;
            let ztn = norm3(zt);
            if ztn < zn {
                accepted = Some((trial_center, framed, zt, ztn));
                break;
            }
            t *= 0.5;
        }
        let Some((c, s, zt, ztn)) = accepted else {
            return Err(Error::Stall { halvings: 8, z_norm: zn });
        };
        center = c;
        current = s;
        z = zt;
        zn = ztn;
        trace.push(BalanceStep { iteration, z_norm: zn, rapidity: t });
    }
    let surface = GraphSurface { center: center.clone(), ..current };
    Ok(Balanced { isometry: center.inverse(), surface, trace })
}

/// Φ such that the mass of Φ*g has spatial part ≤ 1e-3·|m₀|, by secant
/// iteration on the rapidity along the spatial mass direction.
pub fn balanced_coordinates(metric: &MetricField, r_eval: f64) -> Result<Isometry> {
    let m = mass_charge(metric, r_eval)?;
    if m.classification() == Causality::NullOrSpacelike {
        return Err(Error::Causal { norm_sq: m.minkowski_norm_sq() });
    }
    let ms = m.spatial_norm();
    let m0 = m.components[0].abs();
    if ms <= 1e-12 * m0 {
        return Ok(Isometry::identity());
    }
    let sgn = m.components[0].signum();
    let dir = [sgn * m.components[1] / ms, sgn * m.components[2] / ms, sgn * m.components[3] / ms];
    // spatial mass along dir after pulling back by boost(χ, dir)
    let along = |chi: f64| -> Result<(f64, MassVector)> {
        let mv = mass_charge(&pullback_metric(&Isometry::boost(chi, dir), metric), r_eval)?;
        let c = &mv.components;
        Ok((sgn * (c[1] * dir[0] + c[2] * dir[1] + c[3] * dir[2]), mv))
    };
    let mut chi0 = 0.0;
    let mut f0 = ms;
    let mut chi1 = (ms / m0).atanh();
    for _ in 0..20 {
        let (f1, mv) = along(chi1)?;
        if mv.spatial_norm() <= 1e-6 * mv.components[0].abs() {
            return Ok(Isometry::boost(chi1, dir));
        }
        let slope = (f1 - f0) / (chi1 - chi0);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        chi0 = chi1;
        f0 = f1;
        chi1 -= f1 / slope;
    }
    let (_, mv) = along(chi1)?;
    if mv.spatial_norm() <= 1e-3 * mv.components[0].abs() {
        Ok(Isometry::boost(chi1, dir))
    } else {
        Err(Error::Convergence(format!("balancing rapidity iteration stalled at {chi1}")))
    }
}
