//! The constant Gauss curvature equation Δu = 1 − e^{2u} on the unit sphere:
//! bubble solutions, the K functional and the λ ↔ K correspondence.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sphere::{gauss_legendre, ScalarField, SphereGrid};
use crate::surface::tangent_frame;

/// Stored (λ, K) table from the planar-integral oracle.
pub const LAMBDA_K_FIXTURE: &str = include_str!("../data/lambda_k.csv");

/// Largest λ accepted by [`lambda_from_k`].
pub const LAMBDA_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub lambda: f64,
    /// Center in the stereographic plane.
    pub y0: [f64; 2],
}

impl BubbleParams {
    pub fn new(lambda: f64, y0: [f64; 2]) -> Result<Self> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::Range { value: lambda, lo: 1.0, hi: f64::INFINITY });
        }
        if !y0.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("bubble center must be finite".into()));
        }
        Ok(BubbleParams { lambda, y0 })
    }

    /// exp(sup|u|) of the bubble; equals λ only for y0 = 0.
    pub fn effective_lambda(&self) -> f64 {
        let (c, w) = self.affine();
        (c + w) / (2.0 * self.lambda)
    }

    // the bubble denominator is c − w·x on the sphere; returns (c, |w|)
    fn affine(&self) -> (f64, f64) {
        let l2 = self.lambda * self.lambda;
        let y2 = self.y0[0] * self.y0[0] + self.y0[1] * self.y0[1];
        let c = l2 + y2 + 1.0;
        let w = (4.0 * y2 + (l2 + y2 - 1.0).powi(2)).sqrt();
        (c, w)
    }
}

/// e^u = 2λ / ((λ² + |y0|²)(1 − x₃) + 1 + x₃ − 2 (x₁, x₂)·y0): the round
/// metric dilated by λ about y0 in the plane, pulled back to S² by
/// stereographic projection from the north pole and divided by the round
/// conformal factor.
pub fn bubble_value(params: &BubbleParams, x: [f64; 3]) -> f64 {
    let l2 = params.lambda * params.lambda;
    let y = params.y0;
    let d = (l2 + y[0] * y[0] + y[1] * y[1]) * (1.0 - x[2]) + 1.0 + x[2] - 2.0 * (x[0] * y[0] + x[1] * y[1]);
    (2.0 * params.lambda).ln() - d.ln()
}

pub fn bubble(params: &BubbleParams, grid: &Arc<SphereGrid>) -> ScalarField {
    ScalarField::from_fn(grid, |x| bubble_value(params, x))
}

/// Δu − 1 + e^{2u} at the grid nodes.
pub fn gauss_residual(u: &ScalarField) -> Result<ScalarField> {
    let lap = u.laplace_beltrami();
    let s: Vec<f64> = lap.samples.iter().zip(&u.samples).map(|(l, v)| l - 1.0 + (2.0 * v).exp()).collect();
    ScalarField::from_samples(&u.grid, s)
}

/// L² norm over the unit sphere of the node values of [`gauss_residual`].
pub fn gauss_residual_l2(u: &ScalarField) -> Result<f64> {
    let r = gauss_residual(u)?;
    Ok(u.grid.integrate_samples(&r.samples.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt())
}

/// |(mean over S² of e^{2u} x)|.
#[allow(non_snake_case)]
pub fn K_functional(u: &ScalarField) -> f64 {
    let grid = &u.grid;
    let mut m = [0.0; 3];
    for ((p, w), v) in grid.points().iter().zip(grid.weights()).zip(&u.samples) {
        let e = (2.0 * v).exp() * w;
        for i in 0..3 {
            m[i] += e * p[i];
        }
    }
    let s = 1.0 / (4.0 * std::f64::consts::PI);
    (m.iter().map(|v| (v * s).powi(2)).sum::<f64>()).sqrt()
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(24))
}

/// K of the centered bubble from the planar integral
/// λ² ∫₀^∞ (s − 1)/((λ² + s)²(s + 1)) ds. The substitution s = λ² t/(1 − t)
/// turns it into ∫₀¹ ((λ² + 1)t − 1)/((λ² − 1)t + 1) dt.
pub fn planar_k(lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let f = |t: f64| ((l2 + 1.0) * t - 1.0) / ((l2 - 1.0) * t + 1.0);
    // the integrand varies on the scale 1/λ² near t = 0; panels graded geometrically
    let (x, w) = panel_rule();
    let scale = 1.0 / l2.max(1.0);
    let mut edges = vec![0.0];
    let mut e = scale / 16.0;
    while e < 1.0 {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(1.0);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        total += half * x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>();
    }
    total.abs()
}

/// Inverts λ ↦ K on [1, LAMBDA_MAX] by bracketed root finding.
pub fn lambda_from_k(k: f64) -> Result<f64> {
    let top = planar_k(LAMBDA_MAX);
    if !(k >= 0.0 && k < top) {
        return Err(Error::Range { value: k, lo: 0.0, hi: top });
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0f64, LAMBDA_MAX);
    let (mut flo, mut fhi) = (-k, top - k);
    let mut side = 0;
    for _ in 0..200 {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = planar_k(x) - k;
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-13 * hi || fx == 0.0 {
            return Ok(x);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rows of [`LAMBDA_K_FIXTURE`].
pub fn fixture_table() -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for line in LAMBDA_K_FIXTURE.lines() {
        if line.starts_with('#') || line.starts_with("lambda") || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',').map(|v| v.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(l)), Some(Ok(k))) => out.push((l, k)),
            _ => return Err(Error::Config(format!("bad fixture row {line:?}"))),
        }
    }
    Ok(out)
}

/// SHA-256 of the fixture bytes, hex.
pub fn fixture_hash() -> String {
    Sha256::digest(LAMBDA_K_FIXTURE.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// sup over S² of |u| for the band-limited expansion: the largest node value
/// refined by Newton iteration in the tangent plane.
pub fn sup_abs(u: &ScalarField) -> f64 {
    let (i0, v0) = u
        .samples
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let sign = u.samples.get(i0).copied().unwrap_or(0.0).signum();
    let val = |p: [f64; 3]| sign * u.eval_at(normalize(p));
    let mut p = u.grid.points()[i0];
    let h = 1e-4;
    for _ in 0..40 {
        let [e1, e2] = tangent_frame(p);
        let at = |a: f64, b: f64| val(std::array::from_fn(|k| p[k] + a * e1[k] + b * e2[k]));
        let f0 = at(0.0, 0.0);
        let (fa, fa_) = (at(h, 0.0), at(-h, 0.0));
        let (fb, fb_) = (at(0.0, h), at(0.0, -h));
        let g = [(fa - fa_) / (2.0 * h), (fb - fb_) / (2.0 * h)];
        let haa = (fa - 2.0 * f0 + fa_) / (h * h);
        let hbb = (fb - 2.0 * f0 + fb_) / (h * h);
        let hab = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        let det = haa * hbb - hab * hab;
        let step = if haa < 0.0 && det > 0.0 {
            [-(hbb * g[0] - hab * g[1]) / det, -(haa * g[1] - hab * g[0]) / det]
        } else {
            let n = (g[0] * g[0] + g[1] * g[1]).sqrt().max(f64::MIN_POSITIVE);
            [h * g[0] / n, h * g[1] / n]
        };
        let len = (step[0] * step[0] + step[1] * step[1]).sqrt();
        let next = normalize(std::array::from_fn(|k| p[k] + step[0] * e1[k] + step[1] * e2[k]));
        if val(next) < f0 {
            break;
        }
        p = next;
        if len < 1e-12 {
            break;
        }
    }
    val(p).abs().max(v0)
}

/// Outcome of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub residual_l2: f64,
    pub k: f64,
    /// exp(sup|u|).
    pub lambda_sup: f64,
    /// λ with K(bubble(λ)) = K(u); None outside the attainable range.
    pub lambda_k: Option<f64>,
}

pub fn classify(u: &ScalarField) -> Result<Classification> {
    let k = K_functional(u);
    Ok(Classification {
        residual_l2: gauss_residual_l2(u)?,
        k,
        lambda_sup: sup_abs(u).exp(),
        lambda_k: lambda_from_k(k).ok(),
    })
}
