//! Metric families on the global chart, written as the hyperbolic reference
//! metric h plus a deviation e that is computed directly (never as g − h).

use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::isometry::{norm3, Isometry};
use super::jet::{jet_mat_zero, Jet, JetMat};
use crate::error::{Error, Result};

/// Default inner radius of the AdS-Schwarzschild family.
pub const ADS_R_MIN: f64 = 0.5;

/// ADS_R_MIN, pushed out to 1.25 times the radius where sinh³r = −2m/3 for m < 0.
pub fn ads_default_r_min(m: f64) -> f64 {
    if m < 0.0 {
        ADS_R_MIN.max(1.25 * (-2.0 * m / 3.0).cbrt().asinh())
    } else {
        ADS_R_MIN
    }
}
/// Default inner radius of perturbed metrics.
pub const PERTURBED_R_MIN: f64 = 1.0;
/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    /// Central differences of the deviation, Richardson-extrapolated once.
    FiniteDifference { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Seeded random polynomial angular profile of degree <= lmax.
    #[default]
    Random,
    /// Closed-form axisymmetric bump with a P_2(cos θ) radial profile.
    Axisymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub beta: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lmax")]
    pub lmax: usize,
    #[serde(default)]
    pub profile: Profile,
}

fn default_lmax() -> usize {
    4
}

/// Polynomial in the unit direction n, stored on monomials n^α, |α| <= degree.
#[derive(Debug, Clone, PartialEq)]
pub struct DirPoly {
    pub exps: Vec<[u8; 3]>,
    pub coeffs: Vec<f64>,
}

impl DirPoly {
    fn random(rng: &mut ChaCha8Rng, degree: usize) -> Self {
        let exps = monomials(degree);
        let mut coeffs: Vec<f64> = exps.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = coeffs.iter().map(|c| c.abs()).sum();
        if s > 0.0 {
            coeffs.iter_mut().for_each(|c| *c /= s);
        }
        DirPoly { exps, coeffs }
    }

    fn single(terms: &[([u8; 3], f64)]) -> Self {
        DirPoly {
            exps: terms.iter().map(|t| t.0).collect(),
            coeffs: terms.iter().map(|t| t.1).collect(),
        }
    }

    fn max_exp(&self) -> usize {
        self.exps.iter().flat_map(|e| e.iter()).copied().max().unwrap_or(0) as usize
    }

    fn eval(&self, pows: &[Vec<Jet>; 3]) -> Jet {
        let mut out = Jet::ZERO;
        for (e, c) in self.exps.iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let t = pows[0][e[0] as usize] * pows[1][e[1] as usize] * pows[2][e[2] as usize];
            out += t * *c;
        }
        out
    }
}

fn monomials(degree: usize) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    for d in 0..=degree {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                out.push([a as u8, b as u8, (d - a - b) as u8]);
            }
        }
    }
    out
}

/// Angular data of a perturbation: scalar profile Θ and symmetric tensor profile B.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    pub theta: DirPoly,
    pub b: [[usize; 3]; 3],
    pub b_polys: Vec<DirPoly>,
}

impl AngularProfile {
    pub fn build(spec: &PerturbationSpec) -> Self {
        match spec.profile {
            Profile::Axisymmetric => {
                let theta = DirPoly::single(&[([0, 0, 2], 1.5), ([0, 0, 0], -0.5)]);
                let zero = DirPoly::single(&[]);
                let one = DirPoly::single(&[([0, 0, 0], 1.0)]);
                AngularProfile {
                    theta,
                    b: [[0, 0, 0], [0, 0, 0], [0, 0, 1]],
                    b_polys: vec![zero, one],
                }
            }
            Profile::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let theta = DirPoly::random(&mut rng, spec.lmax);
                let b_polys: Vec<DirPoly> = (0..6).map(|_| DirPoly::random(&mut rng, spec.lmax)).collect();
                AngularProfile { theta, b: [[0, 1, 2], [1, 3, 4], [2, 4, 5]], b_polys }
            }
        }
    }

    fn max_exp(&self) -> usize {
        self.b_polys.iter().map(|p| p.max_exp()).chain([self.theta.max_exp()]).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Hyperbolic,
    AdsSchwarzschild { m: f64 },
    Perturbed { base: Arc<MetricField>, spec: PerturbationSpec, profile: Arc<AngularProfile> },
    Convex { tau: f64, a: Arc<MetricField>, b: Arc<MetricField> },
    /// q ↦ DΦᵀ g(Φ(q)) DΦ.
    Pullback { iso: Isometry, base: Arc<MetricField> },
}

/// An asymptotically hyperbolic metric on the chart outside a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub kind: MetricKind,
    pub domain_r_min: f64,
    pub derivative_mode: DerivativeMode,
}

/// Value, first and second chart derivatives of a symmetric tensor field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorJet {
    pub v: [[f64; 3]; 3],
    /// d[k][i][j] = ∂_k T_ij
    pub d: [[[f64; 3]; 3]; 3],
    /// dd[k][l][i][j] = ∂_k ∂_l T_ij
    pub dd: [[[[f64; 3]; 3]; 3]; 3],
}

impl TensorJet {
    pub fn zero() -> Self {
        TensorJet { v: [[0.0; 3]; 3], d: [[[0.0; 3]; 3]; 3], dd: [[[[0.0; 3]; 3]; 3]; 3] }
    }

    pub fn from_jets(m: &JetMat) -> Self {
        let mut t = TensorJet::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.v[i][j] = m[i][j].v;
                for k in 0..3 {
                    t.d[k][i][j] = m[i][j].g[k];
                    for l in 0..3 {
                        t.dd[k][l][i][j] = m[i][j].h[k][l];
                    }
                }
            }
        }
        t
    }
}

impl MetricField {
    pub fn hyperbolic() -> Self {
        MetricField {
            kind: MetricKind::Hyperbolic,
            domain_r_min: 0.0,
            derivative_mode: DerivativeMode::Analytic,
        }
    }

    /// AdS-Schwarzschild with tangential factor sinh²r + (2m/3)/sinh r.
    pub fn ads_schwarzschild(m: f64) -> Result<Self> {
        Self::ads_schwarzschild_with_rmin(m, ads_default_r_min(m))
    }

    pub fn ads_schwarzschild_with_rmin(m: f64, r_min: f64) -> Result<Self> {
        if !m.is_finite() || !(r_min >= 0.0) {
            return Err(Error::Config(format!("invalid AdS parameters m = {m}, r_min = {r_min}")));
        }
        let s = r_min.sinh();
        if r_min == 0.0 && m != 0.0 || s * s * s + 2.0 * m / 3.0 <= 0.0 {
            return Err(Error::Config(format!(
                "AdS-Schwarzschild m = {m} is degenerate at r_min = {r_min}"
            )));
        }
        Ok(MetricField {
            kind: MetricKind::AdsSchwarzschild { m },
            domain_r_min: r_min,
            derivative_mode: DerivativeMode::Analytic,
        })
    }

    pub fn perturbed(base: MetricField, spec: PerturbationSpec) -> Result<Self> {
        if !(spec.beta > 0.0) || !spec.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "perturbation needs beta > 0 and finite amplitude (beta = {}, amplitude = {})",
                spec.beta, spec.amplitude
            )));
        }
        let profile = Arc::new(AngularProfile::build(&spec));
        let r_min = base.domain_r_min.max(PERTURBED_R_MIN);
        Ok(MetricField {
            kind: MetricKind::Perturbed { base: Arc::new(base), spec, profile },
            domain_r_min: r_min,
            derivative_mode: DerivativeMode::Analytic,
        })
    }

    pub fn convex(tau: f64, a: MetricField, b: MetricField) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("convex weight tau = {tau} outside [0, 1]")));
        }
        let r_min = a.domain_r_min.max(b.domain_r_min);
        Ok(MetricField {
            kind: MetricKind::Convex { tau, a: Arc::new(a), b: Arc::new(b) },
            domain_r_min: r_min,
            derivative_mode: DerivativeMode::Analytic,
        })
    }

    /// Metric expressed in coordinates shifted by a boost of rapidity `chi`
    /// along `axis`: a structure centered at the origin appears at chi·axis.
    pub fn boosted(base: MetricField, chi: f64, axis: [f64; 3]) -> MetricField {
        pullback_metric(&Isometry::boost(chi, axis).inverse(), &base)
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn is_hyperbolic(&self) -> bool {
        match &self.kind {
            MetricKind::Hyperbolic => true,
            MetricKind::AdsSchwarzschild { m } => *m == 0.0,
            MetricKind::Perturbed { base, spec, .. } => spec.amplitude == 0.0 && base.is_hyperbolic(),
            MetricKind::Convex { a, b, .. } => a.is_hyperbolic() && b.is_hyperbolic(),
            MetricKind::Pullback { base, .. } => base.is_hyperbolic(),
        }
    }

    /// Rejects points whose evaluation would touch an excluded region.
    pub fn check_domain(&self, x: [f64; 3]) -> Result<()> {
        let r = norm3(x);
        match &self.kind {
            MetricKind::Hyperbolic => Ok(()),
            MetricKind::AdsSchwarzschild { .. } => {
                if r > self.domain_r_min {
                    Ok(())
                } else {
                    Err(Error::Domain { r, r_min: self.domain_r_min })
                }
            }
            MetricKind::Perturbed { base, .. } => {
                if r > self.domain_r_min {
                    base.check_domain(x)
                } else {
                    Err(Error::Domain { r, r_min: self.domain_r_min })
                }
            }
            MetricKind::Convex { a, b, .. } => {
                a.check_domain(x)?;
                b.check_domain(x)
            }
            MetricKind::Pullback { iso, base } => base.check_domain(iso.apply(x)),
        }
    }

    /// Deviation e = g − h as jets, where `x` may itself carry derivatives
    /// with respect to some outer coordinates.
    pub fn deviation_jet(&self, x: [Jet; 3]) -> JetMat {
        match &self.kind {
            MetricKind::Hyperbolic => jet_mat_zero(),
            MetricKind::AdsSchwarzschild { m } => {
                if *m == 0.0 {
                    return jet_mat_zero();
                }
                let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let r = u.sqrt();
                let c = (r.sinh() * u * u).recip() * (2.0 * m / 3.0);
                let mut e = jet_mat_zero();
                for i in 0..3 {
                    for j in i..3 {
                        let mut t = -(x[i] * x[j]);
                        if i == j {
                            t += u;
                        }
                        e[i][j] = c * t;
                        e[j][i] = e[i][j];
                    }
                }
                e
            }
            MetricKind::Perturbed { base, spec, profile } => {
                let mut e = base.deviation_jet(x);
                if spec.amplitude != 0.0 {
                    let p = perturbation_jet(x, spec, profile);
                    for i in 0..3 {
                        for j in 0..3 {
                            e[i][j] += p[i][j];
                        }
                    }
                }
                e
            }
            MetricKind::Convex { tau, a, b } => {
                let ea = a.deviation_jet(x);
                let eb = b.deviation_jet(x);
                let mut e = jet_mat_zero();
                for i in 0..3 {
                    for j in 0..3 {
                        e[i][j] = ea[i][j] * (1.0 - tau) + eb[i][j] * *tau;
                    }
                }
                e
            }
            MetricKind::Pullback { iso, base } => {
                let y = iso.apply_jet(x);
                let d = super::isometry::jacobian_jet(iso, x);
                let eb = base.deviation_jet(y);
                let mut tmp = jet_mat_zero();
                for a in 0..3 {
                    for j in 0..3 {
                        let mut s = Jet::ZERO;
                        for b in 0..3 {
                            s += eb[a][b] * d[b][j];
                        }
                        tmp[a][j] = s;
                    }
                }
                let mut e = jet_mat_zero();
                for i in 0..3 {
                    for j in i..3 {
                        let mut s = Jet::ZERO;
                        for a in 0..3 {
                            s += d[a][i] * tmp[a][j];
                        }
                        e[i][j] = s;
                        e[j][i] = s;
                    }
                }
                e
            }
        }
    }

    fn deviation_value(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let c = [Jet::constant(x[0]), Jet::constant(x[1]), Jet::constant(x[2])];
        let e = self.deviation_jet(c);
        let mut v = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                v[i][j] = e[i][j].v;
            }
        }
        v
    }

    /// Deviation with derivatives in the configured derivative mode.
    pub fn deviation(&self, x: [f64; 3]) -> Result<TensorJet> {
        self.check_domain(x)?;
        match self.derivative_mode {
            DerivativeMode::Analytic => Ok(TensorJet::from_jets(&self.deviation_jet(Jet::point(x)))),
            DerivativeMode::FiniteDifference { h } => self.deviation_fd(x, h),
        }
    }

    fn deviation_fd(&self, x: [f64; 3], h: f64) -> Result<TensorJet> {
        if !(h > 0.0) {
            return Err(Error::Config(format!("finite-difference step {h} must be positive")));
        }
        for k in 0..3 {
            for s in [-2.0, 2.0] {
                let mut y = x;
                y[k] += s * h;
                if self.check_domain(y).is_err() {
                    return Err(Error::Numerical(format!(
                        "finite-difference stencil at {x:?} leaves the metric domain"
                    )));
                }
            }
        }
        let f = |y: [f64; 3]| self.deviation_value(y);
        let shift = |k: usize, a: f64, l: usize, b: f64| {
            let mut y = x;
            y[k] += a;
            y[l] += b;
            y
        };
        let mut t = TensorJet::zero();
        t.v = f(x);
        let first = |k: usize, step: f64| {
            let p = f(shift(k, step, k, 0.0));
            let m = f(shift(k, -step, k, 0.0));
            let mut o = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    o[i][j] = (p[i][j] - m[i][j]) / (2.0 * step);
                }
            }
            o
        };
        let second = |k: usize, l: usize, step: f64| {
            let mut o = [[0.0; 3]; 3];
            if k == l {
                let p = f(shift(k, step, k, 0.0));
                let m = f(shift(k, -step, k, 0.0));
                for i in 0..3 {
                    for j in 0..3 {
                        o[i][j] = (p[i][j] - 2.0 * t.v[i][j] + m[i][j]) / (step * step);
                    }
                }
            } else {
                let pp = f(shift(k, step, l, step));
                let pm = f(shift(k, step, l, -step));
                let mp = f(shift(k, -step, l, step));
                let mm = f(shift(k, -step, l, -step));
                for i in 0..3 {
                    for j in 0..3 {
                        o[i][j] = (pp[i][j] - pm[i][j] - mp[i][j] + mm[i][j]) / (4.0 * step * step);
                    }
                }
            }
            o
        };
        for k in 0..3 {
            let (a, b) = (first(k, h), first(k, 0.5 * h));
            for i in 0..3 {
                for j in 0..3 {
                    t.d[k][i][j] = (4.0 * b[i][j] - a[i][j]) / 3.0;
                }
            }
            for l in k..3 {
                let (a, b) = (second(k, l, h), second(k, l, 0.5 * h));
                for i in 0..3 {
                    for j in 0..3 {
                        let v = (4.0 * b[i][j] - a[i][j]) / 3.0;
                        t.dd[k][l][i][j] = v;
                        t.dd[l][k][i][j] = v;
                    }
                }
            }
        }
        Ok(t)
    }
}

fn perturbation_jet(x: [Jet; 3], spec: &PerturbationSpec, profile: &AngularProfile) -> JetMat {
    let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let r = u.sqrt();
    let rinv = r.recip();
    let n = [x[0] * rinv, x[1] * rinv, x[2] * rinv];
    let deg = profile.max_exp();
    let pows: [Vec<Jet>; 3] = std::array::from_fn(|k| {
        let mut v = Vec::with_capacity(deg + 1);
        v.push(Jet::constant(1.0));
        for p in 1..=deg {
            let last = v[p - 1];
            v.push(last * n[k]);
        }
        v
    });
    let theta = profile.theta.eval(&pows);
    let bvals: Vec<Jet> = profile.b_polys.iter().map(|p| p.eval(&pows)).collect();
    let b: JetMat = std::array::from_fn(|i| std::array::from_fn(|j| bvals[profile.b[i][j]]));
    let pi: JetMat = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let t = -(n[i] * n[j]);
            if i == j {
                t + 1.0
            } else {
                t
            }
        })
    });
    // ΠBΠ and its trace
    let mut bp = jet_mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = Jet::ZERO;
            for k in 0..3 {
                s += b[i][k] * pi[k][j];
            }
            bp[i][j] = s;
        }
    }
    let mut pbp = jet_mat_zero();
    for i in 0..3 {
        for j in i..3 {
            let mut s = Jet::ZERO;
            for k in 0..3 {
                s += pi[i][k] * bp[k][j];
            }
            pbp[i][j] = s;
        }
    }
    for i in 0..3 {
        for j in 0..i {
            pbp[i][j] = pbp[j][i];
        }
    }
    let tr = pbp[0][0] + pbp[1][1] + pbp[2][2];
    let sh = r.sinh();
    let s = sh * sh * rinv * rinv;
    let env = (r * (-spec.beta)).exp() * spec.amplitude;
    let radial = theta;
    let tangential = theta * (-1.0 / spec.beta);
    let mut e = jet_mat_zero();
    for i in 0..3 {
        for j in i..3 {
            let tij = pbp[i][j] - tr * pi[i][j] * 0.5;
            let v = radial * n[i] * n[j] + s * (tangential * pi[i][j] + tij);
            e[i][j] = env * v;
            e[j][i] = e[i][j];
        }
    }
    e
}

/// Reference hyperbolic metric h as jets.
pub fn hyperbolic_jet(x: [Jet; 3]) -> JetMat {
    let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let b = super::isometry::sinhc_sq_minus_one_over_u(u);
    let mut h = jet_mat_zero();
    for i in 0..3 {
        for j in i..3 {
            let mut t = -(x[i] * x[j]);
            if i == j {
                t += u;
            }
            let mut v = b * t;
            if i == j {
                v = v + 1.0;
            }
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// Closed-form reference metric components.
pub fn hyperbolic_metric(x: [f64; 3]) -> Matrix3<f64> {
    let r = norm3(x);
    let mut h = Matrix3::identity();
    if r < 1e-300 {
        return h;
    }
    let s = if r < 1e-4 { 1.0 + r * r / 3.0 } else { (r.sinh() / r).powi(2) };
    for i in 0..3 {
        for j in 0..3 {
            let nn = x[i] * x[j] / (r * r);
            h[(i, j)] += (s - 1.0) * (if i == j { 1.0 } else { 0.0 } - nn);
        }
    }
    h
}

/// g_ij at a chart point.
pub fn eval_metric(metric: &MetricField, x: [f64; 3]) -> Result<Matrix3<f64>> {
    metric.check_domain(x)?;
    let mut g = hyperbolic_metric(x);
    let c = [Jet::constant(x[0]), Jet::constant(x[1]), Jet::constant(x[2])];
    let e = metric.deviation_jet(c);
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] += e[i][j].v;
        }
    }
    Ok(g)
}

/// The metric field q ↦ DΦᵀ g(Φ(q)) DΦ.
pub fn pullback_metric(iso: &Isometry, metric: &MetricField) -> MetricField {
    if iso.is_identity(0.0) {
        return metric.clone();
    }
    if let MetricKind::Hyperbolic = metric.kind {
        return metric.clone();
    }
    let (iso, base) = match &metric.kind {
        MetricKind::Pullback { iso: inner, base } => (inner.compose(iso), base.clone()),
        _ => (*iso, Arc::new(metric.clone())),
    };
    let shift = super::isometry::distance([0.0; 3], iso.apply([0.0; 3]));
    MetricField {
        domain_r_min: base.domain_r_min + if base.domain_r_min > 0.0 { shift } else { 0.0 },
        derivative_mode: metric.derivative_mode,
        kind: MetricKind::Pullback { iso, base },
    }
}

// ---------------------------------------------------------------------------
// JSON metric descriptions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<MetricSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Box<MetricSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Box<MetricSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rapidity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lorentz: Option<Isometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_mode: Option<DerivativeMode>,
}

impl MetricSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("metric spec: {e}")))
    }

    pub fn build(&self) -> Result<MetricField> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("metric kind '{}' requires '{name}'", self.kind)))
        };
        let sub = |v: &Option<Box<MetricSpec>>, name: &str| -> Result<MetricField> {
            v.as_ref()
                .ok_or_else(|| Error::Config(format!("metric kind '{}' requires '{name}'", self.kind)))?
                .build()
        };
        let mut metric = match self.kind.as_str() {
            "hyperbolic" => MetricField::hyperbolic(),
            "ads_schwarzschild" | "ads" => {
                let m = need(self.m, "m")?;
                MetricField::ads_schwarzschild_with_rmin(m, self.r_min.unwrap_or(ads_default_r_min(m)))?
            }
            "perturbed" => {
                let base = match &self.base {
                    Some(b) => b.build()?,
                    None => MetricField::hyperbolic(),
                };
                let p = self
                    .perturbation
                    .clone()
                    .ok_or_else(|| Error::Config("metric kind 'perturbed' requires 'perturbation'".into()))?;
                let mut g = MetricField::perturbed(base, p)?;
                if let Some(r) = self.r_min {
                    g.domain_r_min = g.domain_r_min.max(r);
                }
                g
            }
            "convex" => MetricField::convex(need(self.tau, "tau")?, sub(&self.a, "a")?, sub(&self.b, "b")?)?,
            "boosted" => {
                let chi = need(self.rapidity, "rapidity")?;
                MetricField::boosted(sub(&self.base, "base")?, chi, self.axis.unwrap_or([1.0, 0.0, 0.0]))
            }
            "pullback" => {
                let iso = self
                    .lorentz
                    .ok_or_else(|| Error::Config("metric kind 'pullback' requires 'lorentz'".into()))?;
                pullback_metric(&iso, &sub(&self.base, "base")?)
            }
            other => return Err(Error::Config(format!("unknown metric kind '{other}'"))),
        };
        if let Some(mode) = self.derivative_mode {
            if let DerivativeMode::FiniteDifference { h } = mode {
                if !(h > 0.0) {
                    return Err(Error::Config(format!("finite-difference step {h} must be positive")));
                }
            }
            metric.derivative_mode = mode;
        }
        Ok(metric)
    }
}

impl MetricField {
    /// Serializable description that rebuilds this metric.
    pub fn to_spec(&self) -> MetricSpec {
        let mut s = match &self.kind {
            MetricKind::Hyperbolic => MetricSpec { kind: "hyperbolic".into(), ..Default::default() },
            MetricKind::AdsSchwarzschild { m } => MetricSpec {
                kind: "ads_schwarzschild".into(),
                m: Some(*m),
                r_min: Some(self.domain_r_min),
                ..Default::default()
            },
            MetricKind::Perturbed { base, spec, .. } => MetricSpec {
                kind: "perturbed".into(),
                base: Some(Box::new(base.to_spec())),
                perturbation: Some(spec.clone()),
                ..Default::default()
            },
            MetricKind::Convex { tau, a, b } => MetricSpec {
                kind: "convex".into(),
                tau: Some(*tau),
                a: Some(Box::new(a.to_spec())),
                b: Some(Box::new(b.to_spec())),
                ..Default::default()
            },
            MetricKind::Pullback { iso, base } => MetricSpec {
                kind: "pullback".into(),
                lorentz: Some(*iso),
                base: Some(Box::new(base.to_spec())),
                ..Default::default()
            },
        };
        if self.derivative_mode != DerivativeMode::Analytic {
            s.derivative_mode = Some(self.derivative_mode);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_jet_matches_closed_form() {
        for x in [[0.0, 0.0, 0.0], [1e-3, 2e-3, 0.0], [0.3, 0.1, -0.2], [3.0, 4.0, 1.0]] {
            let hj = hyperbolic_jet(Jet::point(x));
            let h = hyperbolic_metric(x);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((hj[i][j].v - h[(i, j)]).abs() < 1e-13 * h.abs().max());
                }
            }
        }
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(0).len(), 1);
        assert_eq!(monomials(4).len(), 35);
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"kind":"perturbed","base":{"kind":"ads_schwarzschild","m":1.0},
            "perturbation":{"beta":2.6,"amplitude":0.1,"seed":7,"lmax":3}}"#;
        let g = MetricSpec::from_json(text).unwrap().build().unwrap();
        let again = g.to_spec().build().unwrap();
        assert_eq!(g, again);
        assert!(MetricSpec::from_json(r#"{"kind":"ads"}"#).unwrap().build().is_err());
        assert!(MetricSpec::from_json(r#"{"kind":"nope"}"#).unwrap().build().is_err());
        assert!(MetricSpec::from_json(r#"{"kind":"hyperbolic","bogus":1}"#).is_err());
    }
}
