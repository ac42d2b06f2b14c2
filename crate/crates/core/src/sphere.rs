//! Band-limited analysis on the unit sphere: Gauss–Legendre grids, real
//! spherical-harmonic transforms and rotation (Killing) derivatives.
//!
//! Basis: real orthonormal harmonics without Condon–Shortley phase,
//! Y_{l,0} = P̄_l0, Y_{l,m} = √2 P̄_lm cos mφ, Y_{l,−m} = √2 P̄_lm sin mφ,
//! stored at index l² + l + m.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default maximum degree.
pub const DEFAULT_L: usize = 32;

/// Coefficient index of (l, m).
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// (l, m) for a coefficient index.
pub fn index_lm(idx: usize) -> (usize, i64) {
    let l = (idx as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
    (l, idx as i64 - (l * l + l) as i64)
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Gauss–Legendre nodes (descending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Normalized associated Legendre functions divided by sin^m θ, as
/// polynomials in z = cos θ; output indexed by `tri(l, m)`.
fn legendre_reduced(lmax: usize, z: f64, out: &mut [f64]) {
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        out[tri(m, m)] = qmm;
        if m < lmax {
            out[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * z * qmm;
        }
        for l in m + 2..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[tri(l, m)] = a * (z * out[tri(l - 1, m)] - b * out[tri(l - 2, m)]);
        }
    }
}

/// Values of every basis function at a unit vector `p`.
pub fn basis_at(lmax: usize, p: [f64; 3]) -> Vec<f64> {
    let nrm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let (x, y, z) = (p[0] / nrm, p[1] / nrm, p[2] / nrm);
    let mut q = vec![0.0; tri(lmax + 1, 0)];
    legendre_reduced(lmax, z, &mut q);
    let mut out = vec![0.0; (lmax + 1) * (lmax + 1)];
    // (x + iy)^m = sin^m θ e^{imφ}
    let (mut re, mut im) = (1.0, 0.0);
    for m in 0..=lmax {
        if m > 0 {
            let t = re * x - im * y;
            im = re * y + im * x;
            re = t;
        }
        for l in m..=lmax {
            let v = q[tri(l, m)];
            if m == 0 {
                out[lm_index(l, 0)] = v;
            } else {
                out[lm_index(l, m as i64)] = std::f64::consts::SQRT_2 * v * re;
                out[lm_index(l, -(m as i64))] = std::f64::consts::SQRT_2 * v * im;
            }
        }
    }
    out
}

/// Σ c_lm Y_lm(p) without forming the basis vector.
pub fn eval_expansion(lmax: usize, c: &[f64], p: [f64; 3]) -> f64 {
    let nrm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let (x, y, z) = (p[0] / nrm, p[1] / nrm, p[2] / nrm);
    let mut total = 0.0;
    let (mut re, mut im) = (1.0, 0.0);
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let t = re * x - im * y;
            im = re * y + im * x;
            re = t;
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        // Σ_l c_l,±m Q_lm via the three-term recurrence in l
        let mut sa = 0.0;
        let mut sb = 0.0;
        let mut q2 = 0.0;
        let mut q1 = qmm;
        for l in m..=lmax {
            let q = if l == m {
                qmm
            } else if l == m + 1 {
                ((2 * m + 3) as f64).sqrt() * z * qmm
            } else {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
                a * (z * q1 - b * q2)
            };
            if l > m {
                q2 = q1;
                q1 = q;
            }
            sa += c[lm_index(l, m as i64)] * q;
            if m > 0 {
                sb += c[lm_index(l, -(m as i64))] * q;
            }
        }
        if m == 0 {
            total += sa;
        } else {
            total += std::f64::consts::SQRT_2 * (sa * re + sb * im);
        }
    }
    total
}

/// Gauss–Legendre × equispaced-longitude quadrature grid with transform tables.
#[derive(Debug)]
pub struct SphereGrid {
    pub l: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    /// cos θ_j, descending from the north pole.
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// Gauss–Legendre weights (sum 2).
    pub lat_weights: Vec<f64>,
    pub phi: Vec<f64>,
    /// plm[j * ntri + tri(l, m)] = P̄_lm(cos θ_j)
    plm: Vec<f64>,
    cos_mphi: Vec<f64>,
    sin_mphi: Vec<f64>,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereGrid {
    /// Grid with the dealiased minimum sizes n_lat = ⌈3(L+1)/2⌉, n_lon = 3L+1.
    pub fn new(l: usize) -> Result<Self> {
        Self::with_sizes(l, (3 * (l + 1)).div_ceil(2), 3 * l + 1)
    }

    pub fn with_sizes(l: usize, n_lat: usize, n_lon: usize) -> Result<Self> {
        if l == 0 || l > 256 {
            return Err(Error::Config(format!("harmonic degree L = {l} outside [1, 256]")));
        }
        if n_lat < (3 * (l + 1)).div_ceil(2) || n_lon < 3 * l + 1 {
            return Err(Error::Config(format!(
                "grid {n_lat}x{n_lon} too coarse for L = {l} (need at least {}x{})",
                (3 * (l + 1)).div_ceil(2),
                3 * l + 1
            )));
        }
        let (z, w) = gauss_legendre(n_lat);
        let sin_theta: Vec<f64> = z.iter().map(|c| (1.0 - c * c).max(0.0).sqrt()).collect();
        let phi: Vec<f64> = (0..n_lon).map(|k| 2.0 * PI * k as f64 / n_lon as f64).collect();
        let ntri = tri(l + 1, 0);
        let mut plm = vec![0.0; n_lat * ntri];
        let mut q = vec![0.0; ntri];
        for j in 0..n_lat {
            legendre_reduced(l, z[j], &mut q);
            let mut sm = 1.0;
            for m in 0..=l {
                for ll in m..=l {
                    plm[j * ntri + tri(ll, m)] = q[tri(ll, m)] * sm;
                }
                sm *= sin_theta[j];
            }
        }
        let mut cos_mphi = vec![0.0; (l + 1) * n_lon];
        let mut sin_mphi = vec![0.0; (l + 1) * n_lon];
        for m in 0..=l {
            for k in 0..n_lon {
                // exact reduction of m*k modulo n_lon keeps the tables symmetric
                let a = 2.0 * PI * ((m * k) % n_lon) as f64 / n_lon as f64;
                cos_mphi[m * n_lon + k] = a.cos();
                sin_mphi[m * n_lon + k] = a.sin();
            }
        }
        let mut points = Vec::with_capacity(n_lat * n_lon);
        let mut weights = Vec::with_capacity(n_lat * n_lon);
        let dphi = 2.0 * PI / n_lon as f64;
        for j in 0..n_lat {
            for k in 0..n_lon {
                points.push([
                    sin_theta[j] * cos_mphi[n_lon + k],
                    sin_theta[j] * sin_mphi[n_lon + k],
                    z[j],
                ]);
                weights.push(w[j] * dphi);
            }
        }
        Ok(SphereGrid {
            l,
            n_lat,
            n_lon,
            cos_theta: z,
            sin_theta,
            lat_weights: w,
            phi,
            plm,
            cos_mphi,
            sin_mphi,
            points,
            weights,
        })
    }

    /// Process-wide shared grid with default sizes.
    pub fn shared(l: usize) -> Result<Arc<SphereGrid>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SphereGrid>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = cache.lock().expect("grid cache poisoned").get(&l) {
            return Ok(g.clone());
        }
        let g = Arc::new(SphereGrid::new(l)?);
        cache.lock().expect("grid cache poisoned").insert(l, g.clone());
        Ok(g)
    }

    /// Number of coefficients (L+1)².
    pub fn n_coeffs(&self) -> usize {
        (self.l + 1) * (self.l + 1)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_lat * self.n_lon
    }

    /// Unit vectors of the nodes, latitude-major.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Quadrature weights for dμ on the unit sphere (sum 4π).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn plm(&self, j: usize, l: usize, m: usize) -> f64 {
        self.plm[j * tri(self.l + 1, 0) + tri(l, m)]
    }

    /// Samples → coefficients by quadrature.
    pub fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n_nodes() {
            return Err(Error::Shape { expected: self.n_nodes(), got: samples.len() });
        }
        let (l, n_lon) = (self.l, self.n_lon);
        let ntri = tri(l + 1, 0);
        let dphi = 2.0 * PI / n_lon as f64;
        let mut out = vec![0.0; self.n_coeffs()];
        let mut a = vec![0.0; l + 1];
        let mut b = vec![0.0; l + 1];
        for j in 0..self.n_lat {
            let row = &samples[j * n_lon..(j + 1) * n_lon];
            for m in 0..=l {
                let (c, s) = (&self.cos_mphi[m * n_lon..(m + 1) * n_lon], &self.sin_mphi[m * n_lon..(m + 1) * n_lon]);
                let mut sa = 0.0;
                let mut sb = 0.0;
                for k in 0..n_lon {
                    sa += row[k] * c[k];
                    sb += row[k] * s[k];
                }
                a[m] = sa;
                b[m] = sb;
            }
            let w = self.lat_weights[j] * dphi;
            let p = &self.plm[j * ntri..(j + 1) * ntri];
            for m in 0..=l {
                let (am, bm) = if m == 0 {
                    (w * a[0], 0.0)
                } else {
                    (w * std::f64::consts::SQRT_2 * a[m], w * std::f64::consts::SQRT_2 * b[m])
                };
                for ll in m..=l {
                    let pv = p[tri(ll, m)];
                    out[lm_index(ll, m as i64)] += pv * am;
                    if m > 0 {
                        out[lm_index(ll, -(m as i64))] += pv * bm;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Coefficients → samples.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_coeffs() {
            return Err(Error::Shape { expected: self.n_coeffs(), got: coeffs.len() });
        }
        let (l, n_lon) = (self.l, self.n_lon);
        let ntri = tri(l + 1, 0);
        let mut out = vec![0.0; self.n_nodes()];
        let mut a = vec![0.0; l + 1];
        let mut b = vec![0.0; l + 1];
        for j in 0..self.n_lat {
            let p = &self.plm[j * ntri..(j + 1) * ntri];
            for m in 0..=l {
                let mut sa = 0.0;
                let mut sb = 0.0;
                for ll in m..=l {
                    let pv = p[tri(ll, m)];
                    sa += pv * coeffs[lm_index(ll, m as i64)];
                    if m > 0 {
                        sb += pv * coeffs[lm_index(ll, -(m as i64))];
                    }
                }
                if m > 0 {
                    sa *= std::f64::consts::SQRT_2;
                    sb *= std::f64::consts::SQRT_2;
                }
                a[m] = sa;
                b[m] = sb;
            }
            let row = &mut out[j * n_lon..(j + 1) * n_lon];
            for m in 0..=l {
                let (c, s) = (&self.cos_mphi[m * n_lon..(m + 1) * n_lon], &self.sin_mphi[m * n_lon..(m + 1) * n_lon]);
                for k in 0..n_lon {
                    row[k] += a[m] * c[k] + b[m] * s[k];
                }
            }
        }
        Ok(out)
    }

    /// ∫ f dμ over the unit sphere from node samples.
    pub fn integrate_samples(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Weighted Gram matrix G_kl = ∫ w Y_k Y_l dμ from node values of w.
    ///
    /// Sum-factorized: longitude sums first, one small latitude product per
    /// pair of orders.
    pub fn gram(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        if w.len() != self.n_nodes() {
            return Err(Error::Shape { expected: self.n_nodes(), got: w.len() });
        }
        let (l, n_lon, n_lat) = (self.l, self.n_lon, self.n_lat);
        let nm = 2 * l + 1;
        // signed order s ↦ m = s − L; trig[s][k] = T_m(φ_k)
        let mut trig = DMatrix::zeros(nm, n_lon);
        for s in 0..nm {
            let m = s as i64 - l as i64;
            let am = m.unsigned_abs() as usize;
            for k in 0..n_lon {
                trig[(s, k)] = match m.cmp(&0) {
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * self.cos_mphi[am * n_lon + k],
                    std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * self.sin_mphi[am * n_lon + k],
                };
            }
        }
        let dphi = 2.0 * PI / n_lon as f64;
        // lon[j] = trig · diag(w_j) · trigᵀ, scaled by the latitude weight
        let lon: Vec<DMatrix<f64>> = (0..n_lat)
            .map(|j| {
                let mut tw = trig.clone();
                for k in 0..n_lon {
                    let c = w[j * n_lon + k] * dphi * self.lat_weights[j];
                    tw.column_mut(k).scale_mut(c);
                }
                &tw * trig.transpose()
            })
            .collect();
        let pm: Vec<DMatrix<f64>> = (0..=l)
            .map(|m| DMatrix::from_fn(n_lat, l + 1 - m, |j, i| self.plm(j, m + i, m)))
            .collect();
        let n = self.n_coeffs();
        let mut g = DMatrix::zeros(n, n);
        for s in 0..nm {
            let m = s as i64 - l as i64;
            let a = &pm[m.unsigned_abs() as usize];
            for t in s..nm {
                let mp = t as i64 - l as i64;
                let b = &pm[mp.unsigned_abs() as usize];
                let mut bd = b.clone();
                let mut any = false;
                for j in 0..n_lat {
                    let d = lon[j][(s, t)];
                    any |= d != 0.0;
                    bd.row_mut(j).scale_mut(d);
                }
                if !any {
                    continue;
                }
                let blk = a.transpose() * bd;
                for (i, li) in (m.unsigned_abs() as usize..=l).enumerate() {
                    for (k, lk) in (mp.unsigned_abs() as usize..=l).enumerate() {
                        let v = blk[(i, k)];
                        let (r, c) = (lm_index(li, m), lm_index(lk, mp));
                        g[(r, c)] = v;
                        g[(c, r)] = v;
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Applies the rotation derivative L_axis f = (p × e_axis)·∇f in coefficient space.
pub fn killing_coeffs(lmax: usize, axis: usize, c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    let s2 = std::f64::consts::SQRT_2;
    for l in 1..=lmax {
        let lf = l as f64;
        let alpha = |m: f64| ((lf - m) * (lf + m + 1.0)).max(0.0).sqrt();
        let beta = |m: f64| ((lf + m) * (lf - m + 1.0)).max(0.0).sqrt();
        let li = l as i64;
        let r = |m: i64| lm_index(l, m);
        let s = |m: i64| lm_index(l, -m);
        // K = −L; accumulate K and negate at the end.
        match axis {
            2 => {
                for m in 1..=li {
                    let (cr, cs) = (c[r(m)], c[s(m)]);
                    out[s(m)] += -(m as f64) * cr;
                    out[r(m)] += m as f64 * cs;
                }
            }
            0 | 1 => {
                let a0 = (lf * (lf + 1.0)).sqrt();
                let c0 = c[r(0)];
                if axis == 0 {
                    out[s(1)] += a0 / s2 * c0;
                } else {
                    out[r(1)] -= a0 / s2 * c0;
                }
                for m in 1..=li {
                    let (am, bm) = (alpha(m as f64), beta(m as f64));
                    let (cr, cs) = (c[r(m)], c[s(m)]);
                    // contributions to degree m+1
                    if m < li {
                        if axis == 0 {
                            out[s(m + 1)] += 0.5 * am * cr;
                            out[r(m + 1)] -= 0.5 * am * cs;
                        } else {
                            out[r(m + 1)] -= 0.5 * am * cr;
                            out[s(m + 1)] -= 0.5 * am * cs;
                        }
                    }
                    // contributions to degree m−1
                    if m == 1 {
                        if axis == 0 {
                            out[r(0)] -= 0.5 * bm * s2 * cs;
                        } else {
                            out[r(0)] += 0.5 * bm * s2 * cr;
                        }
                    } else if axis == 0 {
                        out[s(m - 1)] += 0.5 * bm * cr;
                        out[r(m - 1)] -= 0.5 * bm * cs;
                    } else {
                        out[r(m - 1)] += 0.5 * bm * cr;
                        out[s(m - 1)] += 0.5 * bm * cs;
                    }
                }
            }
            _ => panic!("axis {axis} out of range"),
        }
    }
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// A real function on the unit sphere held as coefficients and node samples.
///
/// Fields built from coefficients have consistent samples. Fields built from
/// node values (e.g. nonlinear expressions) keep those values as samples,
/// which are then used for quadrature, and carry their degree-L projection
/// as coefficients.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<SphereGrid>,
    pub coeffs: Vec<f64>,
    pub samples: Vec<f64>,
}

impl PartialEq for ScalarField {
    fn eq(&self, o: &Self) -> bool {
        self.grid.l == o.grid.l && self.coeffs == o.coeffs && self.samples == o.samples
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<SphereGrid>) -> Self {
        ScalarField { grid: grid.clone(), coeffs: vec![0.0; grid.n_coeffs()], samples: vec![0.0; grid.n_nodes()] }
    }

    pub fn constant(grid: &Arc<SphereGrid>, c: f64) -> Self {
        let mut f = ScalarField::zeros(grid);
        f.coeffs[0] = c * (4.0 * PI).sqrt();
        f.samples.iter_mut().for_each(|v| *v = c);
        f
    }

    pub fn from_coeffs(grid: &Arc<SphereGrid>, coeffs: Vec<f64>) -> Result<Self> {
        let samples = grid.synthesize(&coeffs)?;
        Ok(ScalarField { grid: grid.clone(), coeffs, samples })
    }

    pub fn from_samples(grid: &Arc<SphereGrid>, samples: Vec<f64>) -> Result<Self> {
        let coeffs = grid.analyze(&samples)?;
        Ok(ScalarField { grid: grid.clone(), coeffs, samples })
    }

    /// Samples f(p) at the grid nodes.
    pub fn from_fn(grid: &Arc<SphereGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().iter().map(|p| f(*p)).collect();
        ScalarField::from_samples(grid, samples).expect("grid-shaped samples")
    }

    /// Single basis function Y_{l,m}.
    pub fn harmonic(grid: &Arc<SphereGrid>, l: usize, m: i64) -> Self {
        let mut c = vec![0.0; grid.n_coeffs()];
        c[lm_index(l, m)] = 1.0;
        ScalarField::from_coeffs(grid, c).expect("grid-shaped coefficients")
    }

    pub fn l_max(&self) -> usize {
        self.grid.l
    }

    pub fn coeff(&self, l: usize, m: i64) -> f64 {
        self.coeffs[lm_index(l, m)]
    }

    /// Replaces samples by the synthesis of the coefficients.
    pub fn band_limited(&self) -> Self {
        ScalarField::from_coeffs(&self.grid, self.coeffs.clone()).expect("grid-shaped coefficients")
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate_samples(&self.samples)
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / (4.0 * PI)
    }

    /// Quadrature L² norm of the samples.
    pub fn l2_norm(&self) -> f64 {
        self.grid.integrate_samples(&self.samples.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }

    /// Max |f| over the nodes.
    pub fn linf_norm(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map on samples.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::from_samples(&self.grid, self.samples.iter().map(|v| f(*v)).collect()).expect("same grid")
    }

    /// Pointwise combination on samples.
    pub fn zip_map(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        let s = self.samples.iter().zip(&o.samples).map(|(a, b)| f(*a, *b)).collect();
        ScalarField::from_samples(&self.grid, s).expect("same grid")
    }

    /// Linear combination a·self + b·o, exact in both representations.
    pub fn axpby(&self, a: f64, o: &ScalarField, b: f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(x, y)| a * x + b * y).collect(),
            samples: self.samples.iter().zip(&o.samples).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.axpby(a, self, 0.0)
    }

    pub fn add(&self, o: &ScalarField) -> Self {
        self.axpby(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &ScalarField) -> Self {
        self.axpby(1.0, o, -1.0)
    }

    /// Round-sphere Laplacian, coefficient-wise.
    pub fn laplace_beltrami(&self) -> Self {
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (l, _) = index_lm(i);
                -((l * (l + 1)) as f64) * v
            })
            .collect();
        ScalarField::from_coeffs(&self.grid, c).expect("same grid")
    }

    /// (L_x f, L_y f, L_z f) with L_i f = (p × e_i)·∇f.
    pub fn killing_derivatives(&self) -> [ScalarField; 3] {
        std::array::from_fn(|axis| {
            ScalarField::from_coeffs(&self.grid, killing_coeffs(self.grid.l, axis, &self.coeffs)).expect("same grid")
        })
    }

    /// Zeroes all coefficients outside `degrees`.
    pub fn project_band(&self, degrees: &BTreeSet<usize>) -> Result<Self> {
        if let Some(&d) = degrees.iter().find(|&&d| d > self.grid.l) {
            return Err(Error::Config(format!("degree {d} exceeds L = {}", self.grid.l)));
        }
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| if degrees.contains(&index_lm(i).0) { *v } else { 0.0 })
            .collect();
        ScalarField::from_coeffs(&self.grid, c)
    }

    /// Evaluates the coefficient expansion at an arbitrary direction.
    pub fn eval_at(&self, p: [f64; 3]) -> f64 {
        eval_expansion(self.grid.l, &self.coeffs, p)
    }

    pub fn to_payload(&self) -> FieldPayload {
        FieldPayload { l: self.grid.l, coeffs: self.coeffs.clone() }
    }

    pub fn from_payload(p: &FieldPayload) -> Result<Self> {
        let grid = SphereGrid::shared(p.l)?;
        ScalarField::from_coeffs(&grid, p.coeffs.clone())
    }
}

/// Serialized form: maximum degree and coefficients in (l, m) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPayload {
    #[serde(rename = "L")]
    pub l: usize,
    pub coeffs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
        let (x, _) = gauss_legendre(8);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn killing_derivative_matches_rotation_difference() {
        let grid = Arc::new(SphereGrid::new(6).unwrap());
        let c: Vec<f64> = (0..grid.n_coeffs()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let f = ScalarField::from_coeffs(&grid, c).unwrap();
        let lf = f.killing_derivatives();
        let p = [0.3, -0.5, (1.0f64 - 0.34).sqrt()];
        let h = 1e-5;
        for axis in 0..3 {
            // L_i f(p) = d/dt f(p + t p × e_i)
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let v = [p[1] * e[2] - p[2] * e[1], p[2] * e[0] - p[0] * e[2], p[0] * e[1] - p[1] * e[0]];
            let at = |t: f64| f.eval_at([p[0] + t * v[0], p[1] + t * v[1], p[2] + t * v[2]]);
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((fd - lf[axis].eval_at(p)).abs() < 1e-8, "axis {axis}: {fd} vs {}", lf[axis].eval_at(p));
        }
    }

    #[test]
    fn index_round_trip() {
        for i in 0..400 {
            let (l, m) = index_lm(i);
            assert_eq!(lm_index(l, m), i);
            assert!(m.unsigned_abs() as usize <= l);
        }
    }

    #[test]
    fn basis_matches_closed_forms() {
        let p = [0.36, -0.48, 0.8];
        let y = basis_at(2, p);
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[lm_index(1, 1)] - c1 * p[0]).abs() < 1e-15);
        assert!((y[lm_index(1, -1)] - c1 * p[1]).abs() < 1e-15);
        assert!((y[lm_index(1, 0)] - c1 * p[2]).abs() < 1e-15);
        let c2 = (5.0 / (16.0 * PI)).sqrt();
        assert!((y[lm_index(2, 0)] - c2 * (3.0 * p[2] * p[2] - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn expansion_matches_basis() {
        let c: Vec<f64> = (0..81).map(|i| ((i * 13 % 7) as f64 - 3.0) / 5.0).collect();
        for p in [[0.36, -0.48, 0.8], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [-0.2, 0.9, -0.1]] {
            let y = basis_at(8, p);
            let direct: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!((eval_expansion(8, &c, p) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_matches_node_products() {
        let grid = SphereGrid::new(6).unwrap();
        let w: Vec<f64> = grid.points().iter().map(|p| 1.0 + 0.3 * p[0] * p[2] - 0.2 * p[1]).collect();
        let g = grid.gram(&w).unwrap();
        let n = grid.n_coeffs();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                grid.synthesize(&e).unwrap()
            })
            .collect();
        for a in 0..n {
            for b in 0..n {
                let v: f64 = (0..grid.n_nodes()).map(|q| grid.weights()[q] * w[q] * cols[a][q] * cols[b][q]).sum();
                assert!((g[(a, b)] - v).abs() < 1e-13, "({a},{b}) {} vs {v}", g[(a, b)]);
            }
        }
        let id = grid.gram(&vec![1.0; grid.n_nodes()]).unwrap();
        assert!((id - DMatrix::identity(n, n)).amax() < 1e-13);
    }
}
