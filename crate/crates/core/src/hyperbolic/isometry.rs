//! Orthochronous Lorentz transformations acting on hyperbolic space through
//! the hyperboloid model.

use std::sync::OnceLock;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::error::{Error, Result};

/// Minkowski metric diag(-1, 1, 1, 1).
pub fn eta() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0))
}

/// Minkowski inner product.
pub fn minkowski_dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Hyperboloid embedding I(x) = (cosh r, sinh r x/r).
pub fn hyperboloid(x: [f64; 3]) -> [f64; 4] {
    let r = norm3(x);
    let s = if r < 1e-8 { 1.0 + r * r / 6.0 } else { r.sinh() / r };
    [r.cosh(), s * x[0], s * x[1], s * x[2]]
}

/// Inverse of [`hyperboloid`]; only the spatial part is used.
pub fn from_hyperboloid(p: [f64; 4]) -> [f64; 3] {
    let rho = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
    let f = if rho < 1e-8 { 1.0 - rho * rho / 6.0 } else { rho.asinh() / rho };
    [f * p[1], f * p[2], f * p[3]]
}

pub(crate) fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Hyperbolic distance between two chart points.
pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = -minkowski_dot(&hyperboloid(a), &hyperboloid(b));
    // acosh loses precision near 1; use the spatial chord instead.
    let pa = hyperboloid(a);
    let pb = hyperboloid(b);
    let d: Vec<f64> = (0..4).map(|i| pa[i] - pb[i]).collect();
    let chord2 = -d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
    if chord2 < 1e-4 {
        // |X-Y|^2 = 2(cosh d - 1) = 4 sinh^2(d/2)
        2.0 * (0.5 * chord2.max(0.0).sqrt()).asinh()
    } else {
        c.max(1.0).acosh()
    }
}

fn series_eval(coeffs: &[f64], u: Jet) -> Jet {
    let mut f0 = 0.0;
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    let mut p = 1.0;
    for (k, c) in coeffs.iter().enumerate() {
        f0 += c * p;
        if k + 1 < coeffs.len() {
            f1 += coeffs[k + 1] * (k + 1) as f64 * p;
        }
        if k + 2 < coeffs.len() {
            f2 += coeffs[k + 2] * ((k + 2) * (k + 1)) as f64 * p;
        }
        p *= u.v;
    }
    u.chain(f0, f1, f2)
}

fn factorial_series(odd: bool) -> &'static [f64] {
    static EVEN: OnceLock<Vec<f64>> = OnceLock::new();
    static ODD: OnceLock<Vec<f64>> = OnceLock::new();
    let build = |start: f64| {
        let mut out = Vec::with_capacity(24);
        let mut fact = 1.0;
        let mut n = start;
        for _ in 0..24 {
            out.push(1.0 / fact);
            n += 1.0;
            fact *= n;
            n += 1.0;
            fact *= n;
        }
        out
    };
    if odd {
        ODD.get_or_init(|| build(1.0))
    } else {
        EVEN.get_or_init(|| build(0.0))
    }
}

/// cosh(sqrt(u)) and sinh(sqrt(u))/sqrt(u) as jets, analytic at u = 0.
fn cosh_sinhc_of_square(u: Jet) -> (Jet, Jet) {
    if u.v < 0.25 {
        (series_eval(factorial_series(false), u), series_eval(factorial_series(true), u))
    } else {
        let s = u.sqrt();
        (s.cosh(), s.sinh() / s)
    }
}

/// asinh(sqrt(v))/sqrt(v) as a jet, analytic at v = 0.
fn asinhc_of_square(v: Jet) -> Jet {
    if v.v < 0.25 {
        series_eval(&asinhc_coeffs(), v)
    } else {
        let s = v.sqrt();
        s.asinh() / s
    }
}

fn deriv_coeffs(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, v)| v * k as f64).collect()
}

fn asinhc_coeffs() -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(40);
    let mut c = 1.0;
    for k in 0..40 {
        let kf = k as f64;
        coeffs.push(c / (2.0 * kf + 1.0));
        c *= -(2.0 * kf + 1.0) / (2.0 * kf + 2.0);
    }
    coeffs
}

/// Derivatives in u of cosh(sqrt(u)) and sinh(sqrt(u))/sqrt(u).
fn d_cosh_sinhc_of_square(u: Jet) -> (Jet, Jet) {
    if u.v < 0.25 {
        (
            series_eval(&deriv_coeffs(factorial_series(false)), u),
            series_eval(&deriv_coeffs(factorial_series(true)), u),
        )
    } else {
        let s = u.sqrt();
        let (sh, ch) = (s.sinh(), s.cosh());
        let s3 = s * s * s;
        (sh / s * 0.5, (s * ch - sh) / s3 * 0.5)
    }
}

fn d_asinhc_of_square(v: Jet) -> Jet {
    if v.v < 0.25 {
        series_eval(&deriv_coeffs(&asinhc_coeffs()), v)
    } else {
        let s = v.sqrt();
        let q = (s * s + 1.0).sqrt();
        (s / q - s.asinh()) / (s * s * s) * 0.5
    }
}

/// (sinh²r/r² − 1)/r² as a function of u = r², analytic at 0.
pub fn sinhc_sq_minus_one_over_u(u: Jet) -> Jet {
    if u.v < 0.25 {
        let g = factorial_series(true);
        let mut sq = vec![0.0; g.len()];
        for i in 0..g.len() {
            for j in 0..g.len() - i {
                sq[i + j] += g[i] * g[j];
            }
        }
        series_eval(&sq[1..], u)
    } else {
        let s = u.sqrt();
        let q = s.sinh() / s;
        (q * q - 1.0) / u
    }
}

/// Jacobian d[a][i] = ∂Φ^a/∂x^i as jets in the outer coordinates of `x`.
pub fn jacobian_jet(iso: &Isometry, x: [Jet; 3]) -> [[Jet; 3]; 3] {
    let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let (c, g) = cosh_sinhc_of_square(u);
    let (dc, dg) = d_cosh_sinhc_of_square(u);
    let p = [c, g * x[0], g * x[1], g * x[2]];
    // DI: 4x3
    let mut di = [[Jet::ZERO; 3]; 4];
    for i in 0..3 {
        di[0][i] = dc * x[i] * 2.0;
        for a in 0..3 {
            let mut t = dg * x[i] * x[a] * 2.0;
            if a == i {
                t += g;
            }
            di[a + 1][i] = t;
        }
    }
    let mut y = [Jet::ZERO; 4];
    let mut ldi = [[Jet::ZERO; 3]; 4];
    for b in 0..4 {
        for k in 0..4 {
            let l = iso.lorentz[(b, k)];
            if l == 0.0 {
                continue;
            }
            y[b] += p[k] * l;
            for i in 0..3 {
                ldi[b][i] += di[k][i] * l;
            }
        }
    }
    let v = y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    let hh = asinhc_of_square(v);
    let dh = d_asinhc_of_square(v);
    let mut out = [[Jet::ZERO; 3]; 3];
    for a in 0..3 {
        for i in 0..3 {
            let mut s = ldi[a + 1][i] * hh;
            let mut dot = Jet::ZERO;
            for b in 0..3 {
                dot += y[b + 1] * ldi[b + 1][i];
            }
            s += dh * y[a + 1] * dot * 2.0;
            out[a][i] = s;
        }
    }
    out
}

pub fn hyperboloid_jet(x: [Jet; 3]) -> [Jet; 4] {
    let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let (c, s) = cosh_sinhc_of_square(u);
    [c, s * x[0], s * x[1], s * x[2]]
}

pub fn from_hyperboloid_jet(p: [Jet; 4]) -> [Jet; 3] {
    let v = p[1] * p[1] + p[2] * p[2] + p[3] * p[3];
    let f = asinhc_of_square(v);
    [f * p[1], f * p[2], f * p[3]]
}

/// An element of the orthochronous Lorentz group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Isometry {
    pub lorentz: Matrix4<f64>,
}

impl TryFrom<Vec<f64>> for Isometry {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        if v.len() != 16 {
            return Err(Error::Shape { expected: 16, got: v.len() });
        }
        Isometry::from_matrix(Matrix4::from_row_slice(&v))
    }
}

impl From<Isometry> for Vec<f64> {
    fn from(iso: Isometry) -> Vec<f64> {
        iso.row_major().to_vec()
    }
}

impl Default for Isometry {
    fn default() -> Self {
        Isometry::identity()
    }
}

impl Isometry {
    pub fn identity() -> Self {
        Isometry { lorentz: Matrix4::identity() }
    }

    /// Validates Lorentz membership and orthochronicity.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        let iso = Isometry { lorentz: m };
        let defect = iso.lorentz_defect();
        let scale = m.abs().max().max(1.0);
        if defect > 1e-12 * scale * scale || m[(0, 0)] < 1.0 - 1e-12 {
            return Err(Error::Numerical(format!(
                "matrix is not an orthochronous Lorentz transformation (defect {defect:e})"
            )));
        }
        Ok(iso)
    }

    /// Boost of rapidity `chi` along `axis`; maps the origin to chi*axis/|axis|.
    pub fn boost(chi: f64, axis: [f64; 3]) -> Self {
        let n = norm3(axis);
        if n == 0.0 || chi == 0.0 {
            return Isometry::identity();
        }
        let u = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (c, s) = (chi.cosh(), chi.sinh());
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        for i in 0..3 {
            m[(0, i + 1)] = s * u[i];
            m[(i + 1, 0)] = s * u[i];
            for j in 0..3 {
                m[(i + 1, j + 1)] += (c - 1.0) * u[i] * u[j];
            }
        }
        Isometry { lorentz: m }
    }

    /// The boost taking the origin to `p`.
    pub fn translation_to(p: [f64; 3]) -> Self {
        let r = norm3(p);
        if r == 0.0 {
            Isometry::identity()
        } else {
            Isometry::boost(r, p)
        }
    }

    /// Rotation by `angle` about `axis` (right-handed).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(axis);
        let mut m = Matrix4::identity();
        if n == 0.0 {
            return Isometry { lorentz: m };
        }
        let k = nalgebra::Vector3::new(axis[0] / n, axis[1] / n, axis[2] / n);
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(k), angle);
        for i in 0..3 {
            for j in 0..3 {
                m[(i + 1, j + 1)] = rot[(i, j)];
            }
        }
        Isometry { lorentz: m }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry { lorentz: self.lorentz * other.lorentz }
    }

    pub fn inverse(&self) -> Isometry {
        let e = eta();
        Isometry { lorentz: e * self.lorentz.transpose() * e }
    }

    /// max |Λᵀ η Λ − η|.
    pub fn lorentz_defect(&self) -> f64 {
        let e = eta();
        (self.lorentz.transpose() * e * self.lorentz - e).abs().max()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.lorentz - Matrix4::identity()).abs().max() <= tol
    }

    pub fn row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.lorentz[(i, j)];
            }
        }
        out
    }

    pub fn act_minkowski(&self, p: [f64; 4]) -> [f64; 4] {
        let v = self.lorentz * Vector4::new(p[0], p[1], p[2], p[3]);
        [v[0], v[1], v[2], v[3]]
    }

    /// Image of a chart point.
    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        from_hyperboloid(self.act_minkowski(hyperboloid(x)))
    }

    /// Image of a chart point carried as jets.
    pub fn apply_jet(&self, x: [Jet; 3]) -> [Jet; 3] {
        let p = hyperboloid_jet(x);
        let mut q = [Jet::ZERO; 4];
        for (i, qi) in q.iter_mut().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                let c = self.lorentz[(i, j)];
                if c != 0.0 {
                    *qi += *pj * c;
                }
            }
        }
        from_hyperboloid_jet(q)
    }

    /// Image, Jacobian dΦ^a/dx^i and second derivatives d²Φ^a/dx^i dx^j.
    pub fn derivatives(&self, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3], [[[f64; 3]; 3]; 3]) {
        let y = self.apply_jet(Jet::point(x));
        let mut val = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        let mut hess = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            val[a] = y[a].v;
            jac[a] = y[a].g;
            hess[a] = y[a].h;
        }
        (val, jac, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boost_moves_origin_along_axis() {
        let p = Isometry::boost(0.7, [1.0, 0.0, 0.0]).apply([0.0; 3]);
        assert!((p[0] - 0.7).abs() < 1e-14 && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
    }

    #[test]
    fn embedding_round_trip() {
        for x in [[0.0, 0.0, 0.0], [1e-9, 0.0, 2e-9], [0.3, -2.0, 5.0], [8.0, 1.0, 0.0]] {
            let y = from_hyperboloid(hyperboloid(x));
            for i in 0..3 {
                assert!((x[i] - y[i]).abs() < 1e-12 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn jets_agree_with_values_near_origin_and_far() {
        let iso = Isometry::boost(0.4, [0.2, 1.0, -0.3]).compose(&Isometry::rotation([1.0, 1.0, 0.0], 0.5));
        for x in [[0.01, 0.02, -0.01], [0.3, 0.2, 0.1], [3.0, -1.0, 2.0]] {
            let (v, jac, hess) = iso.derivatives(x);
            let w = iso.apply(x);
            let h = 1e-5;
            for a in 0..3 {
                assert!((v[a] - w[a]).abs() < 1e-12);
                for k in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let d = (iso.apply(xp)[a] - iso.apply(xm)[a]) / (2.0 * h);
                    assert!((d - jac[a][k]).abs() < 1e-7);
                    let d2 = iso.derivatives(xp).1[a]
                        .iter()
                        .zip(iso.derivatives(xm).1[a].iter())
                        .map(|(p, m)| (p - m) / (2.0 * h))
                        .collect::<Vec<_>>();
                    for l in 0..3 {
                        assert!((d2[l] - hess[a][k][l]).abs() < 1e-6, "{a}{k}{l}");
                    }
                }
            }
        }
    }

    #[test]
    fn distance_is_symmetric_and_matches_boost() {
        let q = [0.5, -0.2, 0.3];
        let d = distance([0.0; 3], q);
        assert!((d - norm3(q)).abs() < 1e-14);
        let a = [1.0, 2.0, 0.0];
        let b = [1.0 + 1e-7, 2.0, 0.0];
        assert!((distance(a, b) - distance(b, a)).abs() < 1e-18);
        assert!(distance(a, b) > 0.0);
    }
}
