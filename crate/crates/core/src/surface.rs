//! Closed surfaces written as geodesic graphs over geodesic spheres, and
//! their extrinsic geometry in an asymptotically hyperbolic metric.
//!
//! A surface is stored in its own frame: the point in direction p sits at
//! chart position ρ(p)·p with ρ = σ + f, and the ambient metric is pulled
//! back by the center isometry. Tangent vectors come from the rotation
//! derivatives L_i, so no quantity depends on a polar parametrization.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{eval_curvature, pullback_metric, CurvatureSample, Isometry, MetricField};
use crate::sphere::{killing_coeffs, FieldPayload, ScalarField, SphereGrid};

/// Smallest admissible geodesic radius of a graph.
pub const MIN_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSurface {
    pub center: Isometry,
    pub sigma: f64,
    pub f: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePayload {
    pub center: Isometry,
    pub sigma: f64,
    pub f: FieldPayload,
}

/// Orthonormal tangent pair of the unit sphere at `p`, valid everywhere.
pub fn tangent_frame(p: [f64; 3]) -> [[f64; 3]; 2] {
    let pv = Vector3::from(p);
    let a = if p[0].abs() <= p[1].abs() && p[0].abs() <= p[2].abs() {
        Vector3::x()
    } else if p[1].abs() <= p[2].abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = a.cross(&pv).normalize();
    let e2 = pv.cross(&e1);
    [[e1[0], e1[1], e1[2]], [e2[0], e2[1], e2[2]]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Weights w with Σ_i w_i (p × e_i) = e for a tangent vector e, i.e. w = e × p.
pub fn frame_weights(p: [f64; 3], frame: &[[f64; 3]; 2]) -> [[f64; 3]; 2] {
    [cross(frame[0], p), cross(frame[1], p)]
}

impl GraphSurface {
    pub fn new(center: Isometry, sigma: f64, f: ScalarField) -> Result<Self> {
        let s = GraphSurface { center, sigma, f };
        s.validate()?;
        Ok(s)
    }

    /// Geodesic sphere of radius `sigma` about center(0).
    pub fn geodesic_sphere(grid: &Arc<SphereGrid>, center: Isometry, sigma: f64) -> Result<Self> {
        GraphSurface::new(center, sigma, ScalarField::zeros(grid))
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.f.grid
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.f.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite graph data".into()));
        }
        let rho = self.radii_samples();
        let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if lo <= MIN_RADIUS {
            return Err(Error::Degenerate(format!("graph radius σ + min f = {lo} <= {MIN_RADIUS}")));
        }
        Ok(())
    }

    /// ρ = σ + f at the grid nodes, from the coefficient expansion.
    pub fn radii_samples(&self) -> Vec<f64> {
        let s = self.f.grid.synthesize(&self.f.coeffs).expect("grid-shaped coefficients");
        s.into_iter().map(|v| v + self.sigma).collect()
    }

    /// Radius in the direction of `p` (any nonzero vector).
    pub fn radius_at(&self, p: [f64; 3]) -> f64 {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        self.sigma + self.f.eval_at([p[0] / n, p[1] / n, p[2] / n])
    }

    /// Chart position of the surface point in direction `p`.
    pub fn embed(&self, p: [f64; 3]) -> [f64; 3] {
        let rho = self.radius_at(p);
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        self.center.apply([rho * p[0] / n, rho * p[1] / n, rho * p[2] / n])
    }

    /// Chart positions of all node points.
    pub fn chart_points(&self) -> Vec<[f64; 3]> {
        let rho = self.radii_samples();
        self.grid()
            .points()
            .iter()
            .zip(rho)
            .map(|(p, r)| self.center.apply([r * p[0], r * p[1], r * p[2]]))
            .collect()
    }

    /// Surface with the same geometry graphed about `new_center` at radius `new_sigma`.
    pub fn regraph(&self, new_center: &Isometry, new_sigma: f64) -> Result<GraphSurface> {
        // maps points in the new frame to the old frame
        let a = self.center.inverse().compose(new_center);
        let grid = self.grid().clone();
        let bounds = (self.f.min(), self.f.max());
        let shift = crate::hyperbolic::distance([0.0; 3], a.inverse().apply([0.0; 3]));
        let rho: Vec<f64> = grid
            .points()
            .par_iter()
            .map(|p| self.ray_intersection(&a, *p, bounds, shift))
            .collect::<Result<Vec<f64>>>()?;
        let f = ScalarField::from_samples(&grid, rho.into_iter().map(|r| r - new_sigma).collect())?;
        GraphSurface::new(*new_center, new_sigma, f.band_limited())
    }

    /// Distance t along direction `p` (new frame) at which the ray meets the surface.
    fn ray_intersection(&self, a: &Isometry, p: [f64; 3], bounds: (f64, f64), shift: f64) -> Result<f64> {
        let phi = |t: f64| {
            let q = a.apply([t * p[0], t * p[1], t * p[2]]);
            let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            if r < 1e-300 {
                return -self.sigma;
            }
            r - self.radius_at(q)
        };
        let (fmin, fmax) = bounds;
        // The old-frame ball of radius σ + min f lies inside the surface and
        // the ball of radius σ + max f contains it; their new-frame images
        // bracket the crossing along the ray.
        let lo0 = (self.sigma + fmin - shift).max(0.0) * 0.999;
        let hi0 = (self.sigma + fmax + shift) * 1.001 + 1e-9;
        let (mut lo, mut hi) = (lo0, hi0);
        let (mut flo, mut fhi) = (phi(lo), phi(hi));
        if !(flo < 0.0 && fhi > 0.0) {
            return Err(Error::Regraph(format!("ray in direction {p:?} does not cross the surface")));
        }
        let mut root = None;
        for it in 0..200 {
            let mut t = lo - flo * (hi - lo) / (fhi - flo);
            if !(t > lo && t < hi) || it % 8 == 7 {
                t = 0.5 * (lo + hi);
            }
            let v = phi(t);
            if v == 0.0 || hi - lo < 1e-14 * (1.0 + t) {
                root = Some(t);
                break;
            }
            if v < 0.0 {
                lo = t;
                flo = v;
                fhi *= 0.5;
            } else {
                hi = t;
                fhi = v;
                flo *= 0.5;
            }
            if v.abs() < 1e-14 * (1.0 + t) {
                root = Some(t);
                break;
            }
        }
        let t = root.unwrap_or(0.5 * (lo + hi));
        // a radial graph is crossed once: probe both sides of the root
        let below = (t - lo0).max(0.0);
        for k in 1..=4 {
            let tb = t - below * k as f64 / 5.0 - 1e-6 * (1.0 + t);
            let ta = t + (hi0 - t + (fmax - fmin) + 1e-3) * k as f64 / 4.0;
            if (tb > 0.0 && phi(tb) > 0.0) || phi(ta) < 0.0 {
                return Err(Error::Regraph(format!("ray in direction {p:?} crosses the surface more than once")));
            }
        }
        Ok(t)
    }

    pub fn to_payload(&self) -> SurfacePayload {
        SurfacePayload { center: self.center, sigma: self.sigma, f: self.f.to_payload() }
    }

    pub fn from_payload(p: &SurfacePayload) -> Result<Self> {
        GraphSurface::new(p.center, p.sigma, ScalarField::from_payload(&p.f)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_payload()).expect("surface serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SurfacePayload =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("surface file: {e}")))?;
        GraphSurface::from_payload(&p)
    }
}

/// Everything computed at one grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    /// Unit direction of the node.
    pub dir: [f64; 3],
    /// Surface point in the surface frame.
    pub point: [f64; 3],
    /// Orthonormal tangent directions of the unit sphere used as frame.
    pub frame: [[f64; 3]; 2],
    /// w_a = e_a × p, so that ∂_{e_a} = Σ_i w_ai L_i.
    pub weights: [[f64; 3]; 2],
    /// Tangent vectors of the surface (surface-frame chart components).
    pub tangents: [[f64; 3]; 2],
    pub normal: [f64; 3],
    pub induced: Matrix2<f64>,
    pub induced_inv: Matrix2<f64>,
    pub second: Matrix2<f64>,
    pub mean_curvature: f64,
    /// |k|²
    pub k_norm_sq: f64,
    /// |Å|²
    pub atf_norm_sq: f64,
    /// √det γ relative to the round unit sphere.
    pub area_density: f64,
    pub ricci_nn: f64,
    pub scalar: f64,
    pub scalar_defect: f64,
    /// Ambient sectional curvature of the tangent plane.
    pub ambient_sectional: f64,
    /// Gauss curvature of the induced metric.
    pub gauss_curvature: f64,
    /// ḡ(p, ν): normal speed of a unit radial graph increment.
    pub radial_normal: f64,
}

#[derive(Debug, Clone)]
pub struct FundamentalForms {
    pub nodes: Vec<NodeGeometry>,
    pub h: ScalarField,
    pub a_tf_norm: ScalarField,
    pub area: f64,
}

impl FundamentalForms {
    pub fn induced(&self) -> Vec<Matrix2<f64>> {
        self.nodes.iter().map(|n| n.induced).collect()
    }

    pub fn second(&self) -> Vec<Matrix2<f64>> {
        self.nodes.iter().map(|n| n.second).collect()
    }

    pub fn normal(&self) -> Vec<[f64; 3]> {
        self.nodes.iter().map(|n| n.normal).collect()
    }

    /// ∫ q dμ_γ for node values q.
    pub fn integrate(&self, grid: &SphereGrid, q: impl Fn(&NodeGeometry) -> f64) -> f64 {
        self.nodes.iter().zip(grid.weights()).map(|(n, w)| w * n.area_density * q(n)).sum()
    }
}

/// Rotation derivatives of ρ at the nodes: (L_i ρ, L_i L_j ρ).
pub(crate) fn radial_derivatives(f: &ScalarField) -> (Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>) {
    let grid = &f.grid;
    let l = grid.l;
    let first: Vec<Vec<f64>> = (0..3).map(|i| killing_coeffs(l, i, &f.coeffs)).collect();
    let mut d1 = vec![[0.0; 3]; grid.n_nodes()];
    let mut d2 = vec![[[0.0; 3]; 3]; grid.n_nodes()];
    for j in 0..3 {
        let s = grid.synthesize(&first[j]).expect("grid-shaped");
        for (n, v) in s.into_iter().enumerate() {
            d1[n][j] = v;
        }
        for i in 0..3 {
            let c = killing_coeffs(l, i, &first[j]);
            let s = grid.synthesize(&c).expect("grid-shaped");
            for (n, v) in s.into_iter().enumerate() {
                d2[n][i][j] = v;
            }
        }
    }
    (d1, d2)
}

/// Node geometry from ρ, its rotation derivatives and ambient curvature at ρp.
pub fn node_geometry(
    dir: [f64; 3],
    rho: f64,
    d1: [f64; 3],
    d2: [[f64; 3]; 3],
    curv: &CurvatureSample,
) -> Result<NodeGeometry> {
    let p = dir;
    let v: [[f64; 3]; 3] = std::array::from_fn(|i| {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        cross(p, e)
    });
    // T_i = (L_iρ) p + ρ (p × e_i)
    let t: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| d1[i] * p[k] + rho * v[i][k]));
    let frame = tangent_frame(p);
    let w = frame_weights(p, &frame);
    let tangents: [[f64; 3]; 2] =
        std::array::from_fn(|a| std::array::from_fn(|k| (0..3).map(|i| w[a][i] * t[i][k]).sum()));
    // S_ij = (L_iL_jρ) p + (L_jρ) v_i + (L_iρ) v_j + ρ v_i × e_j
    let mut sab = [[[0.0; 3]; 2]; 2];
    for i in 0..3 {
        for j in 0..3 {
            let mut ej = [0.0; 3];
            ej[j] = 1.0;
            let vv = cross(v[i], ej);
            let s: [f64; 3] =
                std::array::from_fn(|k| d2[i][j] * p[k] + d1[j] * v[i][k] + d1[i] * v[j][k] + rho * vv[k]);
            for a in 0..2 {
                for b in 0..2 {
                    let c = w[a][i] * w[b][j];
                    if c != 0.0 {
                        for k in 0..3 {
                            sab[a][b][k] += c * s[k];
                        }
                    }
                }
            }
        }
    }
    let g = &curv.g;
    let xa = Vector3::from(tangents[0]);
    let xb = Vector3::from(tangents[1]);
    let induced = Matrix2::new(
        xa.dot(&(g * xa)),
        xa.dot(&(g * xb)),
        xb.dot(&(g * xa)),
        xb.dot(&(g * xb)),
    );
    let det = induced.determinant();
    if !(det > 0.0) {
        return Err(Error::Degenerate(format!("induced metric not positive definite in direction {p:?}")));
    }
    let induced_inv = induced.try_inverse().ok_or_else(|| Error::Degenerate("singular induced metric".into()))?;
    let mut ncov = xa.cross(&xb);
    if ncov.dot(&Vector3::from(p)) < 0.0 {
        ncov = -ncov;
    }
    let nn = ncov.dot(&(curv.g_inv * ncov)).sqrt();
    let ncov = ncov / nn;
    let normal = curv.g_inv * ncov;
    let gam = &curv.christoffels;
    let mut second = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for k in 0..3 {
                let mut acc = sab[a][b][k];
                for i in 0..3 {
                    for j in 0..3 {
                        acc += gam[k][i][j] * tangents[a][i] * tangents[b][j];
                    }
                }
                s += acc * ncov[k];
            }
            second[(a, b)] = s;
        }
    }
    second = 0.5 * (second + second.transpose());
    let h = (induced_inv * second).trace();
    let kmix = induced_inv * second;
    let k_norm_sq = (kmix * kmix).trace();
    let amix = induced_inv * (second - 0.5 * h * induced);
    let atf_norm_sq = (amix * amix).trace();
    let ricci_nn = normal.dot(&(curv.ricci * normal));
    let mut sec = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    let coef = tangents[0][a] * tangents[1][b] * tangents[0][c] * tangents[1][d];
                    if coef != 0.0 {
                        sec += coef * curv.riemann_lower(a, b, c, d);
                    }
                }
            }
        }
    }
    let ambient_sectional = sec / det;
    let gauss_curvature = ambient_sectional + second.determinant() / det;
    let radial_normal = Vector3::from(p).dot(&ncov);
    Ok(NodeGeometry {
        dir: p,
        point: [rho * p[0], rho * p[1], rho * p[2]],
        frame,
        weights: w,
        tangents,
        normal: [normal[0], normal[1], normal[2]],
        induced,
        induced_inv,
        second,
        mean_curvature: h,
        k_norm_sq,
        atf_norm_sq,
        area_density: det.sqrt(),
        ricci_nn,
        scalar: curv.scalar,
        scalar_defect: curv.scalar_defect,
        ambient_sectional,
        gauss_curvature,
        radial_normal,
    })
}

/// Metric expressed in the surface frame.
pub fn frame_metric(surface: &GraphSurface, metric: &MetricField) -> MetricField {
    pullback_metric(&surface.center, metric)
}

/// Induced metric, normal, second fundamental form, H, |Å| and area.
pub fn fundamental_forms(surface: &GraphSurface, metric: &MetricField) -> Result<FundamentalForms> {
    surface.validate()?;
    let local = frame_metric(surface, metric);
    let grid = surface.grid().clone();
    let rho = surface.radii_samples();
    let (d1, d2) = radial_derivatives(&surface.f);
    let nodes: Vec<NodeGeometry> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(n, p)| {
            let x = [rho[n] * p[0], rho[n] * p[1], rho[n] * p[2]];
            let curv = eval_curvature(&local, x)?;
            node_geometry(*p, rho[n], d1[n], d2[n], &curv)
        })
        .collect::<Result<Vec<_>>>()?;
    let h = ScalarField::from_samples(&grid, nodes.iter().map(|n| n.mean_curvature).collect())?;
    let a_tf_norm = ScalarField::from_samples(&grid, nodes.iter().map(|n| n.atf_norm_sq.max(0.0).sqrt()).collect())?;
    let area = nodes.iter().zip(grid.weights()).map(|(n, w)| w * n.area_density).sum();
    Ok(FundamentalForms { nodes, h, a_tf_norm, area })
}

/// H + 2 coth σ_target on the parameter sphere.
pub fn cmc_residual(surface: &GraphSurface, metric: &MetricField, sigma_target: f64) -> Result<ScalarField> {
    let ff = fundamental_forms(surface, metric)?;
    let target = 2.0 / sigma_target.tanh();
    Ok(ff.h.map(|h| h + target))
}

/// Hyperbolic Hawking mass (|M|/16π)^{1/2} (1 − (1/16π) ∫ (H² − 4) dμ).
pub fn hawking_mass(surface: &GraphSurface, metric: &MetricField) -> Result<f64> {
    let ff = fundamental_forms(surface, metric)?;
    Ok(hawking_mass_from_forms(&ff, surface.grid()))
}

pub fn hawking_mass_from_forms(ff: &FundamentalForms, grid: &SphereGrid) -> f64 {
    let willmore = ff.integrate(grid, |n| 0.5 * (n.mean_curvature * n.mean_curvature - 4.0));
    (ff.area / (16.0 * PI)).sqrt() * (1.0 - willmore / (8.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussChecks {
    pub gauss_bonnet_defect: f64,
    pub gauss_equation_residual_l2: f64,
}

pub fn gauss_checks(surface: &GraphSurface, metric: &MetricField) -> Result<GaussChecks> {
    let ff = fundamental_forms(surface, metric)?;
    Ok(gauss_checks_from_forms(&ff, surface.grid()))
}

pub fn gauss_checks_from_forms(ff: &FundamentalForms, grid: &SphereGrid) -> GaussChecks {
    let total = ff.integrate(grid, |n| n.gauss_curvature);
    let res = ff.integrate(grid, |n| {
        let rhs = n.scalar - 2.0 * n.ricci_nn - n.atf_norm_sq + 0.5 * n.mean_curvature * n.mean_curvature;
        let d = 2.0 * n.gauss_curvature - rhs;
        d * d
    });
    GaussChecks { gauss_bonnet_defect: (total - 4.0 * PI).abs(), gauss_equation_residual_l2: res.max(0.0).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    /// Present only when H is constant to relative spread 1e-6.
    pub sigma_h: Option<f64>,
    pub sigma_a: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// σ with −2 coth σ = h, for h < −2.
pub fn sigma_from_mean_curvature(h: f64) -> Option<f64> {
    let c = -0.5 * h;
    (c > 1.0).then(|| (1.0 / c).atanh())
}

/// σ_A with 4π sinh² σ_A = area.
pub fn area_radius(area: f64) -> f64 {
    (area / (4.0 * PI)).sqrt().asinh()
}

pub fn radii(surface: &GraphSurface, metric: &MetricField) -> Result<Radii> {
    let ff = fundamental_forms(surface, metric)?;
    Ok(radii_from_forms(surface, &ff))
}

pub fn radii_from_forms(surface: &GraphSurface, ff: &FundamentalForms) -> Radii {
    let grid = surface.grid();
    let mean = ff.integrate(grid, |n| n.mean_curvature) / ff.area;
    let var = ff.integrate(grid, |n| (n.mean_curvature - mean).powi(2)) / ff.area;
    let sigma_h = if var.sqrt() < 1e-6 * mean.abs() { sigma_from_mean_curvature(mean) } else { None };
    let rho = surface.radii_samples();
    Radii {
        sigma_h,
        sigma_a: area_radius(ff.area),
        r_min: rho.iter().copied().fold(f64::INFINITY, f64::min),
        r_max: rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Raw and scale-aware norms of the graph function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNorms {
    pub linf: f64,
    /// L² on the unit sphere.
    pub l2: f64,
    /// L² of the round gradient on the unit sphere.
    pub grad_l2: f64,
    /// L² of the round Hessian on the unit sphere.
    pub hess_l2: f64,
    /// ‖f‖_{L²} + |M|^{1/2}(‖∇f‖_{L²} + |M|^{1/2}‖∇²f‖_{L²}) on the reference sphere of radius σ.
    pub w22_scaled: f64,
}

pub fn graph_norms(surface: &GraphSurface) -> GraphNorms {
    let f = &surface.f;
    let mut l2 = 0.0;
    let mut grad = 0.0;
    let mut lap = 0.0;
    for (i, c) in f.coeffs.iter().enumerate() {
        let (l, _) = crate::sphere::index_lm(i);
        let ev = (l * (l + 1)) as f64;
        l2 += c * c;
        grad += ev * c * c;
        lap += ev * ev * c * c;
    }
    // Bochner on the unit sphere: ∫|∇²f|² = ∫(Δf)² − ∫|∇f|²
    let hess = (lap - grad).max(0.0);
    let r = surface.sigma.sinh();
    let (l2, grad, hess) = (l2.sqrt(), grad.sqrt(), hess.sqrt());
    let s = (4.0 * PI).sqrt() * r;
    GraphNorms {
        linf: f.band_limited().linf_norm(),
        l2,
        grad_l2: grad,
        hess_l2: hess,
        w22_scaled: r * l2 + s * (grad + s * hess / r),
    }
}

/// Outward-transformed normal and the matching chart point, in the global chart.
pub fn chart_normal(surface: &GraphSurface, node: &NodeGeometry) -> ([f64; 3], [f64; 3]) {
    let (y, jac, _) = surface.center.derivatives(node.point);
    let j = Matrix3::from_fn(|a, i| jac[a][i]);
    let n = j * Vector3::from(node.normal);
    (y, [n[0], n[1], n[2]])
}
