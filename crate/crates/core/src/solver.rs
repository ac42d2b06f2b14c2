//! Newton solution of H = −2 coth σ for radial graphs, continuation along
//! convex metric paths from AdS-Schwarzschild, σ-sweeps and lapse
//! diagnostics.
//!
//! The Newton system is the Galerkin form of J w = −(H + 2 coth σ) for the
//! normal speed w, converted to a graph increment by δf = w / φ_n.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::curvature::christoffels;
use crate::hyperbolic::{hyperbolic_metric, pullback_metric, Isometry, MetricField};
use crate::invariants::{balance, center_of_mass, hyperbolic_center, mass_charge, CenterMeasure, Causality};
use crate::report::csv_float;
use crate::sphere::{ScalarField, SphereGrid, DEFAULT_L};
use crate::stability::{assemble_from_forms, low_modes_or_dense, StabilityOperator};
use crate::surface::{area_radius, fundamental_forms, graph_norms, hawking_mass_from_forms, FundamentalForms, GraphNorms, GraphSurface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    /// Reuse the previous solution.
    #[default]
    Trivial,
    /// Linear extrapolation from the last two accepted τ-steps.
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Target for ‖H + 2 coth σ‖_{L²} / √area.
    pub tol_residual: f64,
    pub max_newton: usize,
    /// Cap on line-search halvings.
    pub damping: usize,
    /// l = 1 eigenvalues below kernel_threshold / sinh³σ are treated as a kernel.
    pub kernel_threshold: f64,
    /// Extra Newton steps once the residual target is met.
    pub polish: usize,
    /// Compare each Newton step with a central difference of the residual.
    pub check_jacobian: bool,
    pub predictor: Predictor,
    /// Harmonic degree for surfaces created by continuation.
    pub degree: usize,
    /// Initial continuation step count (Δτ = 1/steps, clamped to [1/256, 1/4]).
    pub steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_residual: 1e-10,
            max_newton: 30,
            damping: 6,
            kernel_threshold: 1e-3,
            polish: 2,
            check_jacobian: cfg!(debug_assertions),
            predictor: Predictor::Trivial,
            degree: DEFAULT_L,
            steps: 4,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || !(self.kernel_threshold > 0.0) {
            return Err(Error::Config("tol_residual and kernel_threshold must be positive".into()));
        }
        if self.max_newton == 0 || self.damping == 0 || self.degree == 0 || self.steps == 0 {
            return Err(Error::Config("max_newton, damping, degree and steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub surface: GraphSurface,
    /// Newton steps taken before the residual target was met.
    pub iterations: usize,
    /// Steps taken after it was met.
    pub polish_steps: usize,
    /// ‖H + 2 coth σ‖_{L²} / √area at each iterate, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// ‖δf‖∞ of each accepted step.
    pub steps: Vec<f64>,
    /// λ₀..λ₃ of −J at the last linearization.
    pub low_eigenvalues: Vec<f64>,
    /// True if the l = 1 band was treated as a kernel.
    pub kernel_mode: bool,
    /// Relative mismatch between the Jacobian action and a central difference, per step.
    pub jacobian_errors: Vec<f64>,
}

struct State {
    forms: FundamentalForms,
    residual: ScalarField,
    norm: f64,
}

fn state(surface: &GraphSurface, metric: &MetricField, sigma: f64) -> Result<State> {
    let forms = fundamental_forms(surface, metric)?;
    let target = 2.0 / sigma.tanh();
    let residual = forms.h.map(|h| h + target);
    let sq = forms.integrate(surface.grid(), |n| {
        let r = n.mean_curvature + target;
        r * r
    });
    let norm = (sq.max(0.0) / forms.area).sqrt();
    Ok(State { forms, residual, norm })
}

/// ‖H + 2 coth σ‖_{L²} / √area.
pub fn relative_residual(surface: &GraphSurface, metric: &MetricField, sigma: f64) -> Result<f64> {
    Ok(state(surface, metric, sigma)?.norm)
}

/// Graph increment δf with J(φ_n δf) = −R in Galerkin form, and the l = 1 data.
struct Step {
    df: ScalarField,
    low: Vec<f64>,
    kernel: bool,
}

/// Galerkin matrix of w ↦ (w/φ_n)·dH(p^⊤), the tangential part of the graph
/// variation of H that −A misses away from a CMC surface.
fn tangential_matrix(op: &StabilityOperator) -> Result<DMatrix<f64>> {
    let grid = op.grid();
    let dh = op.forms.h.killing_derivatives();
    let weights: Vec<f64> = op
        .forms
        .nodes
        .iter()
        .enumerate()
        .map(|(q, n)| {
            let t = nalgebra::Matrix3x2::from_columns(&[n.tangents[0].into(), n.tangents[1].into()]);
            let pt = nalgebra::Vector3::from(n.dir) - n.radial_normal * nalgebra::Vector3::from(n.normal);
            let alpha = (t.transpose() * t).try_inverse().map(|m| m * (t.transpose() * pt)).unwrap_or_default();
            let mut dp = 0.0;
            for a in 0..2 {
                let da: f64 = (0..3).map(|i| n.weights[a][i] * dh[i].samples[q]).sum();
                dp += alpha[a] * da;
            }
            n.area_density * dp / n.radial_normal
        })
        .collect();
    grid.gram(&weights)
}

/// Galerkin matrix of the full graph linearization, δR = −(A − T) w.
fn linearization(op: &StabilityOperator) -> Result<DMatrix<f64>> {
    Ok(&op.matrix - tangential_matrix(op)?)
}

fn newton_direction(op: &StabilityOperator, residual: &ScalarField, threshold: f64, deflate: bool) -> Result<Step> {
    let low = low_modes_or_dense(op, 4)?;
    let kernel = deflate || (1..low.values.len()).any(|k| low.values[k].abs() < threshold);
    let b = op.load_vector(residual)?;
    let full = linearization(op)?;
    let w = if !kernel {
        full
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularJacobian("stability operator is singular".into()))?
    } else {
        // minimum-norm solve on the complement of the l = 1 modes
        let v = low.vectors.columns(1, low.values.len() - 1).into_owned();
        let mv = &op.mass * &v;
        let b_perp = &b - &mv * (v.transpose() * &b);
        let shift = 1.0 / op.surface.sigma.sinh().powi(2);
        let shifted: DMatrix<f64> = &full + shift * (&mv * mv.transpose());
        let w = shifted
            .lu()
            .solve(&b_perp)
            .ok_or_else(|| Error::SingularJacobian("deflated stability operator is singular".into()))?;
        let comp = mv.transpose() * &w;
        w - v * comp
    };
    let grid = op.grid();
    let ws = grid.synthesize(w.as_slice())?;
    let speed: Vec<f64> = ws
        .iter()
        .zip(&op.forms.nodes)
        .map(|(w, n)| w / n.radial_normal)
        .collect();
    let df = ScalarField::from_samples(grid, speed)?.band_limited();
    Ok(Step { df, low: low.values.iter().copied().collect(), kernel })
}

fn with_f(surface: &GraphSurface, f: ScalarField) -> GraphSurface {
    GraphSurface { center: surface.center.clone(), sigma: surface.sigma, f }
}

/// Relative mismatch between −(A − T)·(φ_n d) and a central difference of
/// the weak residual along the graph direction d.
pub fn jacobian_consistency(
    op: &StabilityOperator,
    metric: &MetricField,
    sigma: f64,
    direction: &ScalarField,
) -> Result<f64> {
    let surface = &op.surface;
    let scale = direction.linf_norm().max(f64::MIN_POSITIVE);
    let eps = 1e-3 / scale;
    let plus = state(&with_f(surface, surface.f.axpby(1.0, direction, eps)), metric, sigma)?;
    let minus = state(&with_f(surface, surface.f.axpby(1.0, direction, -eps)), metric, sigma)?;
    let fd = plus.residual.zip_map(&minus.residual, |a, b| (a - b) / (2.0 * eps));
    let lhs = op.load_vector(&fd)?;
    let dsamples = direction.grid.synthesize(&direction.coeffs)?;
    let speed: Vec<f64> = dsamples.iter().zip(&op.forms.nodes).map(|(d, n)| d * n.radial_normal).collect();
    let w = DVector::from_vec(op.grid().analyze(&speed)?);
    let rhs = -(linearization(op)? * w);
    Ok((&lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE))
}

pub fn newton_solve(metric: &MetricField, sigma: f64, init: &GraphSurface, opts: &SolveOptions) -> Result<GraphSurface> {
    Ok(newton_solve_report(metric, sigma, init, opts)?.surface)
}

pub fn newton_solve_report(
    metric: &MetricField,
    sigma: f64,
    init: &GraphSurface,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let mut report = newton_core(metric, sigma, init, opts)?;
    if report.kernel_mode {
        // the l = 1 content was left to the least-squares selection; recenter
        let framed = GraphSurface { center: Isometry::identity(), ..report.surface.clone() };
        let phi = balance(&framed).map_err(|e| Error::SingularJacobian(format!("recentering failed: {e}")))?;
        if !phi.is_identity(1e-10) {
            let center = report.surface.center.compose(&phi.inverse());
            let moved = report.surface.regraph(&center, report.surface.sigma)?;
            let polished = newton_core(metric, sigma, &moved, opts)
                .map_err(|e| Error::SingularJacobian(format!("recentered solve failed: {e}")))?;
            report.surface = polished.surface;
            report.iterations += polished.iterations;
            report.polish_steps += polished.polish_steps;
            report.residuals.extend(polished.residuals);
            report.steps.extend(polished.steps);
            report.jacobian_errors.extend(polished.jacobian_errors);
            report.low_eigenvalues = polished.low_eigenvalues;
        }
    }
    Ok(report)
}

fn newton_core(metric: &MetricField, sigma: f64, init: &GraphSurface, opts: &SolveOptions) -> Result<SolveReport> {
    init.validate()?;
    let threshold = opts.kernel_threshold / sigma.sinh().powi(3);
    let mut surface = init.clone();
    let mut st = state(&surface, metric, sigma)?;
    let mut report = SolveReport {
        surface: surface.clone(),
        iterations: 0,
        polish_steps: 0,
        residuals: vec![st.norm],
        steps: Vec::new(),
        low_eigenvalues: Vec::new(),
        kernel_mode: false,
        jacobian_errors: Vec::new(),
    };
    let mut polish_left = opts.polish;
    let mut kernel_seen = false;
    for _ in 0..opts.max_newton {
        if st.norm <= opts.tol_residual {
            if polish_left == 0 || report.steps.last().is_some_and(|s| *s < 1e-13 * sigma.max(1.0)) {
                break;
            }
            polish_left -= 1;
        }
        let converged = st.norm <= opts.tol_residual;
        let residual = st.residual.clone();
        let rn = st.norm;
        let op = assemble_from_forms(&surface, st.forms)?;
        let search = |step: &Step| {
            let mut t = 1.0;
            for _ in 0..=opts.damping {
                let trial = with_f(&surface, surface.f.axpby(1.0, &step.df, t));
                if trial.validate().is_ok() {
                    if let Ok(s) = state(&trial, metric, sigma) {
                        let ok = if converged { s.norm <= opts.tol_residual.max(rn) * 1.5 } else { s.norm < rn };
                        if ok {
                            return Some((trial, s, t));
                        }
                    }
                }
                t *= 0.5;
            }
            None
        };
        let mut step = newton_direction(&op, &residual, threshold, false)?;
        kernel_seen |= step.kernel;
        report.low_eigenvalues = step.low.clone();
        if opts.check_jacobian && !converged {
            let err = jacobian_consistency(&op, metric, sigma, &step.df)?;
            debug_assert!(rn > 1e-6 || err <= 1e-4, "Jacobian action disagrees with finite differences: {err:e}");
            report.jacobian_errors.push(err);
        }
        let mut accepted = search(&step);
        if accepted.is_none() && !step.kernel {
            // far from a leaf the l = 1 eigenvalues are swamped by the
            // coupling to the deformation; freeze the translations instead
            step = newton_direction(&op, &residual, threshold, true)?;
            accepted = search(&step);
        }
        let Some((trial, s, t)) = accepted else {
            if converged {
                break;
            }
            let err = Error::MaxIterations { iterations: report.iterations, residual: rn };
            return Err(if kernel_seen { Error::SingularJacobian(format!("near-kernel solve stalled: {err}")) } else { err });
        };
        report.steps.push(t * step.df.linf_norm());
        if converged {
            report.polish_steps += 1;
        } else {
            report.iterations += 1;
        }
        surface = trial;
        st = s;
        report.residuals.push(st.norm);
    }
    if st.norm > opts.tol_residual {
        let err = Error::MaxIterations { iterations: report.iterations, residual: st.norm };
        return Err(if kernel_seen { Error::SingularJacobian(format!("near-kernel solve stalled: {err}")) } else { err });
    }
    report.surface = surface;
    report.kernel_mode = kernel_seen;
    Ok(report)
}

/// Continuation data of [`continue_metric`].
#[derive(Debug, Clone)]
pub struct ContinuationReport {
    pub surface: GraphSurface,
    /// Balanced time component of the target mass.
    pub m_hat: f64,
    /// Center of mass of the target, where the comparison metric is centered.
    pub center: [f64; 3],
    /// Accepted τ values.
    pub taus: Vec<f64>,
    /// Corrector iterations per accepted step.
    pub corrector_iterations: Vec<usize>,
}

/// The AdS-Schwarzschild comparison metric of `target` and its data.
pub fn comparison_metric(target: &MetricField, sigma: f64, opts: &SolveOptions) -> Result<(MetricField, f64, [f64; 3])> {
    let m = mass_charge(target, sigma + 3.0)?;
    let q = m.minkowski_norm_sq();
    let m_hat = m.components[0].signum() * (-q).max(0.0).sqrt();
    if 6.0 * m.components.iter().fold(0.0f64, |a, v| a.max(v.abs())) < opts.kernel_threshold {
        return Err(Error::SingularJacobian(format!(
            "mass vector {:?} is zero to the kernel threshold; the l = 1 band is a kernel and the leaf is not unique",
            m.components
        )));
    }
    if m.classification() == Causality::NullOrSpacelike {
        return Err(Error::Causal { norm_sq: q });
    }
    let center = center_of_mass(&m)?;
    let ads = MetricField::ads_schwarzschild(m_hat)?;
    let shifted = pullback_metric(&Isometry::translation_to(center).inverse(), &ads);
    Ok((shifted, m_hat, center))
}

pub fn continue_metric(target: &MetricField, sigma: f64, steps: usize, opts: &SolveOptions) -> Result<GraphSurface> {
    Ok(continue_metric_report(target, sigma, steps, opts)?.surface)
}

pub fn continue_metric_report(
    target: &MetricField,
    sigma: f64,
    steps: usize,
    opts: &SolveOptions,
) -> Result<ContinuationReport> {
    opts.validate()?;
    let (ads, m_hat, center) = comparison_metric(target, sigma, opts)?;
    let grid = SphereGrid::shared(opts.degree)?;
    let start = GraphSurface::geodesic_sphere(&grid, Isometry::translation_to(center), sigma)?;
    let mut current = newton_solve(&ads, sigma, &start, opts)?;
    let (dt_min, dt_max) = (1.0 / 256.0, 0.25);
    let mut dt = (1.0 / steps.max(1) as f64).clamp(dt_min, dt_max);
    let mut tau = 0.0;
    let mut previous: Option<(f64, ScalarField)> = None;
    let mut out = ContinuationReport { surface: current.clone(), m_hat, center, taus: Vec::new(), corrector_iterations: Vec::new() };
    while tau < 1.0 {
        let next = (tau + dt).min(1.0);
        let metric = MetricField::convex(next, ads.clone(), target.clone())?;
        let guess = match (opts.predictor, &previous) {
            (Predictor::Secant, Some((t0, f0))) => {
                let slope = (next - tau) / (tau - t0);
                with_f(&current, current.f.axpby(1.0 + slope, f0, -slope))
            }
            _ => current.clone(),
        };
        let guess = if guess.validate().is_ok() { guess } else { current.clone() };
        match newton_solve_report(&metric, sigma, &guess, opts) {
            Ok(rep) => {
                previous = Some((tau, current.f.clone()));
                tau = next;
                current = rep.surface;
                out.taus.push(tau);
                out.corrector_iterations.push(rep.iterations);
                if rep.iterations <= 2 {
                    dt = (dt * 2.0).min(dt_max);
                }
            }
            Err(e @ Error::SingularJacobian(_)) => return Err(e),
            Err(_) => {
                dt *= 0.5;
                if dt < dt_min {
                    return Err(Error::ContinuationStall { tau, step: dt });
                }
            }
        }
    }
    out.surface = current;
    Ok(out)
}

/// Per-leaf diagnostics of a foliation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDiagnostics {
    pub sigma: f64,
    pub residual: f64,
    pub area: f64,
    pub sigma_a: f64,
    pub atf_l2: f64,
    pub atf_linf: f64,
    pub f_linf: f64,
    pub f_l2: f64,
    pub f_w22_scaled: f64,
    /// λ₀..λ₄ of −J.
    pub lambdas: [f64; 5],
    pub hawking_mass: f64,
    /// Hyperbolic center with the reference area measure.
    pub center: [f64; 3],
    /// ‖u − 1‖∞ of the lapse from the previous leaf; NaN for the first leaf.
    pub lapse_sup_defect: f64,
    pub newton_iterations: usize,
}

pub const FOLIATION_CSV_HEADER: &str = "sigma,residual,area,sigma_A,A_tf_L2,A_tf_Linf,f_Linf,lambda_0,lambda_1,lambda_2,lambda_3,lambda_4,mHaw,center_x,center_y,center_z,lapse_sup_defect";

impl LeafDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut v = vec![self.sigma, self.residual, self.area, self.sigma_a, self.atf_l2, self.atf_linf, self.f_linf];
        v.extend(self.lambdas);
        v.push(self.hawking_mass);
        v.extend(self.center);
        v.push(self.lapse_sup_defect);
        v.iter().map(|x| csv_float(*x)).collect::<Vec<_>>().join(",")
    }
}

/// Diagnostics of a solved leaf.
pub fn leaf_diagnostics(leaf: &GraphSurface, metric: &MetricField) -> Result<LeafDiagnostics> {
    let sigma = leaf.sigma;
    let st = state(leaf, metric, sigma)?;
    let grid = leaf.grid().clone();
    let atf_l2 = st.forms.integrate(&grid, |n| n.atf_norm_sq.max(0.0)).sqrt();
    let atf_linf = st.forms.a_tf_norm.linf_norm();
    let area = st.forms.area;
    let hawking = hawking_mass_from_forms(&st.forms, &grid);
    let norms: GraphNorms = graph_norms(leaf);
    let op = assemble_from_forms(leaf, st.forms)?;
    let low = low_modes_or_dense(&op, 5)?;
    let mut lambdas = [f64::NAN; 5];
    for (k, v) in low.values.iter().enumerate().take(5) {
        lambdas[k] = *v;
    }
    let center = hyperbolic_center(leaf, CenterMeasure::Reference)?.center_point;
    Ok(LeafDiagnostics {
        sigma,
        residual: st.norm,
        area,
        sigma_a: area_radius(area),
        atf_l2,
        atf_linf,
        f_linf: norms.linf,
        f_l2: norms.l2,
        f_w22_scaled: norms.w22_scaled,
        lambdas,
        hawking_mass: hawking,
        center,
        lapse_sup_defect: f64::NAN,
        newton_iterations: 0,
    })
}

#[derive(Debug, Clone)]
pub struct FoliationResult {
    pub leaves: Vec<(f64, GraphSurface)>,
    pub diagnostics: Vec<LeafDiagnostics>,
}

impl FoliationResult {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(FOLIATION_CSV_HEADER);
        s.push('\n');
        for d in &self.diagnostics {
            s.push_str(&d.to_csv());
            s.push('\n');
        }
        s
    }
}

/// Evenly spaced σ values from `sigma_min` to `sigma_max`.
pub fn sigma_grid(sigma_min: f64, sigma_max: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(sigma_max >= sigma_min) || (n > 1 && sigma_max == sigma_min) {
        return Err(Error::Config(format!("invalid σ range {sigma_min}:{sigma_max}:{n}")));
    }
    if n == 1 {
        return Ok(vec![sigma_min]);
    }
    Ok((0..n).map(|k| sigma_min + (sigma_max - sigma_min) * k as f64 / (n - 1) as f64).collect())
}

/// Smallest radial gap of `outer` over `inner`, both graphed about inner's center.
pub fn nesting_gap(inner: &GraphSurface, outer: &GraphSurface) -> Result<f64> {
    let o = outer.regraph(&inner.center, inner.sigma)?;
    let a = inner.radii_samples();
    let b = o.radii_samples();
    Ok(a.iter().zip(&b).map(|(x, y)| y - x).fold(f64::INFINITY, f64::min))
}

pub fn foliate(metric: &MetricField, sigma_min: f64, sigma_max: f64, n_leaves: usize, opts: &SolveOptions) -> Result<FoliationResult> {
    opts.validate()?;
    let sigmas = sigma_grid(sigma_min, sigma_max, n_leaves)?;
    let mut leaves: Vec<(f64, GraphSurface)> = Vec::with_capacity(sigmas.len());
    let mut diagnostics = Vec::with_capacity(sigmas.len());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let (leaf, iterations) = if k == 0 {
            let rep = continue_metric_report(metric, sigma, opts.steps, opts)?;
            let its = rep.corrector_iterations.iter().sum();
            (rep.surface, its)
        } else {
            let prev = &leaves[k - 1].1;
            let guess = GraphSurface { center: prev.center.clone(), sigma, f: prev.f.clone() };
            let rep = newton_solve_report(metric, sigma, &guess, opts)?;
            (rep.surface, rep.iterations)
        };
        let mut diag = leaf_diagnostics(&leaf, metric)?;
        diag.newton_iterations = iterations;
        if k > 0 {
            let prev = &leaves[k - 1].1;
            let gap = nesting_gap(prev, &leaf)?;
            if !(gap > 0.0) {
                return Err(Error::Overlap(format!("leaves σ = {} and σ = {sigma} touch (gap {gap})", sigmas[k - 1])));
            }
            let u = lapse_diagnostic(prev, &leaf, metric)?;
            diag.lapse_sup_defect = u.samples.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        }
        diagnostics.push(diag);
        leaves.push((sigma, leaf));
    }
    Ok(FoliationResult { leaves, diagnostics })
}

fn geodesic_rhs(metric: &MetricField, y: &[f64; 6]) -> Result<[f64; 6]> {
    let (_, gam) = christoffels(metric, [y[0], y[1], y[2]])?;
    let v = [y[3], y[4], y[5]];
    let mut out = [v[0], v[1], v[2], 0.0, 0.0, 0.0];
    for k in 0..3 {
        let mut a = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                a += gam[k][i][j] * v[i] * v[j];
            }
        }
        out[3 + k] = -a;
    }
    Ok(out)
}

fn rk4(metric: &MetricField, y: &[f64; 6], h: f64) -> Result<[f64; 6]> {
    let add = |a: &[f64; 6], b: &[f64; 6], s: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = geodesic_rhs(metric, y)?;
    let k2 = geodesic_rhs(metric, &add(y, &k1, 0.5 * h))?;
    let k3 = geodesic_rhs(metric, &add(y, &k2, 0.5 * h))?;
    let k4 = geodesic_rhs(metric, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Normal geodesic distance from each node of `leaf_a` to `leaf_b`, divided by σ_b − σ_a.
pub fn lapse_diagnostic(leaf_a: &GraphSurface, leaf_b: &GraphSurface, metric: &MetricField) -> Result<ScalarField> {
    let ds = leaf_b.sigma - leaf_a.sigma;
    if !(ds > 0.0) {
        return Err(Error::Config(format!("lapse needs σ_b > σ_a (got {} and {})", leaf_a.sigma, leaf_b.sigma)));
    }
    let ff = fundamental_forms(leaf_a, metric)?;
    let local = pullback_metric(&leaf_a.center, metric);
    // leaf_b in leaf_a's frame
    let to_b = leaf_b.center.inverse().compose(&leaf_a.center);
    let outside = |x: [f64; 3]| -> f64 {
        let q = to_b.apply(x);
        let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        r - leaf_b.radius_at(q)
    };
    let h = ds / 16.0;
    let limit = 3.0 * ds;
    let values: Vec<f64> = ff
        .nodes
        .par_iter()
        .enumerate()
        .map(|(idx, node)| -> Result<f64> {
            let mut y = [node.point[0], node.point[1], node.point[2], node.normal[0], node.normal[1], node.normal[2]];
            let mut s = 0.0;
            let mut phi = outside(node.point);
            loop {
                let next = rk4(&local, &y, h)?;
                let pn = outside([next[0], next[1], next[2]]);
                if pn >= 0.0 {
                    // Illinois on the step length from y
                    let (mut lo, mut hi, mut flo, mut fhi) = (0.0, h, phi, pn);
                    let mut side = 0;
                    let mut t = h;
                    for _ in 0..60 {
                        t = (lo * fhi - hi * flo) / (fhi - flo);
                        if !(t > lo && t < hi) {
                            t = 0.5 * (lo + hi);
                        }
                        let ft = {
                            let z = rk4(&local, &y, t)?;
                            outside([z[0], z[1], z[2]])
                        };
                        if ft.abs() < 1e-14 || hi - lo < 1e-13 {
                            break;
                        }
                        if ft < 0.0 {
                            lo = t;
                            flo = ft;
                            if side == -1 {
                                fhi *= 0.5;
                            }
                            side = -1;
                        } else {
                            hi = t;
                            fhi = ft;
                            if side == 1 {
                                flo *= 0.5;
                            }
                            side = 1;
                        }
                    }
                    return Ok((s + t) / ds);
                }
                s += h;
                if s > limit {
                    return Err(Error::Shoot { node: idx });
                }
                y = next;
                phi = pn;
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarField::from_samples(leaf_a.grid(), values)
}

/// Outcome of [`metric_stability_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub graph_linf: f64,
    pub graph_l2: f64,
    /// max over the sphere of radius σ of |e_a − e_b|_h + |∇(e_a − e_b)|_h.
    pub metric_c1_distance: f64,
}

/// C¹ distance between two metrics on the coordinate sphere of radius r.
pub fn metric_c1_distance(a: &MetricField, b: &MetricField, r: f64, grid: &Arc<SphereGrid>) -> Result<f64> {
    let vals: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|p| -> Result<f64> {
            let x = [r * p[0], r * p[1], r * p[2]];
            let (ea, eb) = (a.deviation(x)?, b.deviation(x)?);
            let hi = hyperbolic_metric(x).try_inverse().expect("reference metric is invertible");
            let gam = crate::hyperbolic::curvature::reference_christoffels(x);
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    for ii in 0..3 {
                        for jj in 0..3 {
                            v += hi[(i, ii)] * hi[(j, jj)] * (ea.v[i][j] - eb.v[i][j]) * (ea.v[ii][jj] - eb.v[ii][jj]);
                        }
                    }
                }
            }
            let mut de = [[[0.0; 3]; 3]; 3];
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut s = ea.d[k][i][j] - eb.d[k][i][j];
                        for l in 0..3 {
                            s -= gam[l][k][i] * (ea.v[l][j] - eb.v[l][j]) + gam[l][k][j] * (ea.v[i][l] - eb.v[i][l]);
                        }
                        de[k][i][j] = s;
                    }
                }
            }
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
            Ok(v.max(0.0).sqrt() + g2.max(0.0).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Graph distance between the σ-leaves of two metrics against their C¹ distance.
pub fn metric_stability_probe(a: &MetricField, b: &MetricField, sigma: f64, opts: &SolveOptions) -> Result<ProbeResult> {
    let la = continue_metric(a, sigma, opts.steps, opts)?;
    let lb = continue_metric(b, sigma, opts.steps, opts)?;
    let (graph_linf, graph_l2) = graph_distance(&la, &lb)?;
    let metric_c1_distance = metric_c1_distance(a, b, sigma, la.grid())?;
    Ok(ProbeResult { graph_linf, graph_l2, metric_c1_distance })
}

/// (‖Δf‖∞, ‖Δf‖_{L²(S²)}) after graphing `b` over `a`'s center and radius.
pub fn graph_distance(a: &GraphSurface, b: &GraphSurface) -> Result<(f64, f64)> {
    let same = a.center.lorentz == b.center.lorentz && a.sigma == b.sigma;
    let b = if same { b.clone() } else { b.regraph(&a.center, a.sigma)? };
    let d: Vec<f64> = a.radii_samples().iter().zip(b.radii_samples()).map(|(x, y)| y - x).collect();
    let linf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = a.grid().integrate_samples(&d.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    Ok((linf, l2))
}

/// Band-limited random graph function of degree ≤ `lmax` with sup norm `amplitude`.
pub fn random_graph_field(grid: &Arc<SphereGrid>, lmax: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> ScalarField {
    let n = (lmax.min(grid.l) + 1).pow(2);
    let mut c = vec![0.0; grid.n_coeffs()];
    for v in c.iter_mut().take(n) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let f = ScalarField::from_coeffs(grid, c).expect("grid-shaped");
    let s = f.linf_norm();
    if s == 0.0 {
        f
    } else {
        f.scale(amplitude / s)
    }
}

/// Solves from `n_trials` seeded perturbed starts and reports each graph
/// distance to the solution from the unperturbed start.
pub fn uniqueness_probe(
    metric: &MetricField,
    sigma: f64,
    n_trials: usize,
    seed: u64,
    amplitude: f64,
    opts: &SolveOptions,
) -> Result<(GraphSurface, Vec<f64>)> {
    let reference = continue_metric(metric, sigma, opts.steps, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = reference.grid().clone();
    let starts: Vec<ScalarField> = (0..n_trials).map(|_| random_graph_field(&grid, 4, amplitude, &mut rng)).collect();
    let mut out = Vec::with_capacity(n_trials);
    for f0 in starts {
        let init = GraphSurface::new(reference.center.clone(), sigma, f0)?;
        let s = newton_solve(metric, sigma, &init, opts)?;
        out.push(graph_distance(&reference, &s)?.0);
    }
    Ok((reference, out))
}

/// Outward unit normal speed check used by tests: ḡ(p, ν) at every node.
pub fn radial_normal_speeds(surface: &GraphSurface, metric: &MetricField) -> Result<Vec<f64>> {
    Ok(fundamental_forms(surface, metric)?.nodes.iter().map(|n| n.radial_normal).collect())
}
