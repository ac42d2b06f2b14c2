//! The stability (Jacobi) operator J f = Δf + (R̄ic(ν,ν) + |k|²) f of a
//! surface, discretized by Galerkin projection onto the harmonic basis of
//! its parameter sphere.
//!
//! With f = Σ c_k Y_k the weak form of −J is the matrix
//! A = K − Gram[V√γ] against the mass matrix M = Gram[√γ], where the
//! stiffness K collects ∫ γ^{ab} ∂_a f ∂_b g dμ_γ through the rotation
//! derivatives L_i, which act exactly on each degree.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hyperbolic::MetricField;
use crate::report::csv_float;
use crate::sphere::{killing_coeffs, ScalarField, SphereGrid};
use crate::surface::{fundamental_forms, hawking_mass_from_forms, FundamentalForms, GraphSurface};

/// Columns of a sparse coefficient-space operator: `cols[c] = [(row, value)]`.
#[derive(Debug)]
pub(crate) struct SparseCols {
    pub(crate) cols: Vec<Vec<(usize, f64)>>,
}

/// The three rotation derivatives as sparse matrices for degree ≤ `l`.
pub(crate) fn killing_matrices(l: usize) -> Arc<[SparseCols; 3]> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<[SparseCols; 3]>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("cache poisoned").get(&l) {
        return k.clone();
    }
    let n = (l + 1) * (l + 1);
    let mats = Arc::new(std::array::from_fn(|axis| {
        let mut e = vec![0.0; n];
        let cols = (0..n)
            .map(|c| {
                e[c] = 1.0;
                let out = killing_coeffs(l, axis, &e);
                e[c] = 0.0;
                out.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()
            })
            .collect();
        SparseCols { cols }
    }));
    cache.lock().expect("cache poisoned").insert(l, mats.clone());
    mats
}

/// Kᵢᵀ G Kⱼ for sparse Kᵢ, Kⱼ.
fn sandwich(ki: &SparseCols, g: &DMatrix<f64>, kj: &SparseCols) -> DMatrix<f64> {
    let n = g.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (c, col) in kj.cols.iter().enumerate() {
        let mut dst = p.column_mut(c);
        for &(r, v) in col {
            dst.axpy(v, &g.column(r), 1.0);
        }
    }
    // (Kᵢᵀ P)ᵀ = Pᵀ Kᵢ, built column by column
    let pt = p.transpose();
    let mut out = DMatrix::zeros(n, n);
    for (c, col) in ki.cols.iter().enumerate() {
        let mut dst = out.column_mut(c);
        for &(r, v) in col {
            dst.axpy(v, &pt.column(r), 1.0);
        }
    }
    out.transpose()
}

/// Solutions of A x = λ M x with M-orthonormal eigenvectors, ascending.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: DVector<f64>,
    /// Coefficient vectors as columns.
    pub vectors: DMatrix<f64>,
}

/// Cholesky-reduced symmetric eigensolve.
pub fn generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let (lt, c) = reduce(a, m)?;
    let eig = c.try_symmetric_eigen(1e-15, 0).ok_or_else(|| Error::Convergence("symmetric QR iteration".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let y = DMatrix::from_fn(a.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    let vectors = lt.solve_upper_triangular(&y).ok_or_else(|| Error::Convergence("singular mass matrix".into()))?;
    Ok(GeneralizedEigen { values, vectors })
}

/// (Lᵀ, L⁻¹ A L⁻ᵀ) for M = L Lᵀ.
fn reduce(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let chol = m.clone().cholesky().ok_or_else(|| Error::Convergence("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let la = l.solve_lower_triangular(a).ok_or_else(|| Error::Convergence("singular mass matrix".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Convergence("singular mass matrix".into()))?;
    let c = 0.5 * (&c + c.transpose());
    Ok((l.transpose(), c))
}

/// Galerkin form of −J on a surface.
#[derive(Debug, Clone)]
pub struct StabilityOperator {
    pub surface: GraphSurface,
    pub forms: FundamentalForms,
    /// R̄ic(ν,ν) + |k|² at the nodes.
    pub potential: ScalarField,
    /// Dirichlet form of the induced metric.
    pub stiffness: DMatrix<f64>,
    /// Induced-metric L² Gram matrix.
    pub mass: DMatrix<f64>,
    /// stiffness − potential Gram, symmetrized.
    pub matrix: DMatrix<f64>,
    /// max|A − Aᵀ| / max|A| before symmetrization.
    pub symmetry_defect: f64,
    spectrum: OnceLock<GeneralizedEigen>,
    laplace: OnceLock<GeneralizedEigen>,
}

pub fn assemble(surface: &GraphSurface, metric: &MetricField) -> Result<StabilityOperator> {
    let ff = fundamental_forms(surface, metric)?;
    assemble_from_forms(surface, ff)
}

pub fn assemble_from_forms(surface: &GraphSurface, ff: FundamentalForms) -> Result<StabilityOperator> {
    let grid = surface.grid().clone();
    let density: Vec<f64> = ff.nodes.iter().map(|n| n.area_density).collect();
    let pot: Vec<f64> = ff.nodes.iter().map(|n| n.ricci_nn + n.k_norm_sq).collect();
    let mass = grid.gram(&density)?;
    let vmass = grid.gram(&pot.iter().zip(&density).map(|(v, d)| v * d).collect::<Vec<_>>())?;
    // C_ij = √γ Σ_ab w_ai γ^{ab} w_bj
    let mut coef = vec![vec![0.0; grid.n_nodes()]; 6];
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    for (q, n) in ff.nodes.iter().enumerate() {
        for (s, &(i, j)) in pairs.iter().enumerate() {
            let mut v = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    v += n.weights[a][i] * n.induced_inv[(a, b)] * n.weights[b][j];
                }
            }
            coef[s][q] = n.area_density * v;
        }
    }
    let k = killing_matrices(grid.l);
    let n = grid.n_coeffs();
    let mut stiffness = DMatrix::zeros(n, n);
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let g = grid.gram(&coef[s])?;
        let t = sandwich(&k[i], &g, &k[j]);
        if i == j {
            stiffness += t;
        } else {
            stiffness += &t + t.transpose();
        }
    }
    let a = &stiffness - &vmass;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let symmetry_defect = (&a - a.transpose()).amax() / scale;
    let matrix = 0.5 * (&a + a.transpose());
    let stiffness = 0.5 * (&stiffness + stiffness.transpose());
    Ok(StabilityOperator {
        surface: surface.clone(),
        potential: ScalarField::from_samples(&grid, pot)?,
        forms: ff,
        stiffness,
        mass,
        matrix,
        symmetry_defect,
        spectrum: OnceLock::new(),
        laplace: OnceLock::new(),
    })
}

impl StabilityOperator {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.surface.grid()
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// ⟨−J f, g⟩ in the induced L² pairing for band-limited f, g.
    pub fn bilinear(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        let (x, y) = (DVector::from_column_slice(&f.coeffs), DVector::from_column_slice(&g.coeffs));
        x.dot(&(&self.matrix * y))
    }

    /// Induced L² inner product of band-limited fields.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        let (x, y) = (DVector::from_column_slice(&f.coeffs), DVector::from_column_slice(&g.coeffs));
        x.dot(&(&self.mass * y))
    }

    /// Galerkin representative of −J f.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        let x = DVector::from_column_slice(&f.coeffs);
        let rhs = &self.matrix * x;
        let chol = self.mass.clone().cholesky().ok_or_else(|| Error::Convergence("mass matrix".into()))?;
        ScalarField::from_coeffs(self.grid(), chol.solve(&rhs).as_slice().to_vec())
    }

    /// Full generalized spectrum of −J, computed once.
    pub fn eigen(&self) -> Result<&GeneralizedEigen> {
        if let Some(e) = self.spectrum.get() {
            return Ok(e);
        }
        let e = generalized_eigen(&self.matrix, &self.mass)?;
        Ok(self.spectrum.get_or_init(|| e))
    }

    /// Full generalized spectrum of −Δ_γ, computed once.
    pub fn laplace_eigen(&self) -> Result<&GeneralizedEigen> {
        if let Some(e) = self.laplace.get() {
            return Ok(e);
        }
        let e = generalized_eigen(&self.stiffness, &self.mass)?;
        Ok(self.laplace.get_or_init(|| e))
    }

    /// ∫ f Y_k dμ_γ for every k, from node samples of f.
    pub fn load_vector(&self, f: &ScalarField) -> Result<DVector<f64>> {
        let w: Vec<f64> = f.samples.iter().zip(&self.forms.nodes).map(|(v, n)| v * n.area_density).collect();
        Ok(DVector::from_vec(self.grid().analyze(&w)?))
    }
}

/// Lowest `count` eigenpairs of −J by block inverse iteration shifted to
/// −1/sinh²σ, with Rayleigh–Ritz; the start block is the first `count`
/// harmonics. Returns `None` if the block has not converged after 200 sweeps.
pub fn low_modes(op: &StabilityOperator, count: usize) -> Result<Option<GeneralizedEigen>> {
    let n = op.dimension();
    let count = count.min(n);
    let mu = -1.0 / op.surface.sigma.sinh().powi(2);
    let shifted = &op.matrix - mu * &op.mass;
    let lu = shifted.lu();
    let mut x = DMatrix::zeros(n, count);
    for k in 0..count {
        x[(k, k)] = 1.0;
    }
    let scale = op.matrix.amax().max(f64::MIN_POSITIVE);
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let y = lu
            .solve(&(&op.mass * &x))
            .ok_or_else(|| Error::Convergence("shifted operator is singular".into()))?;
        let ay = &op.matrix * &y;
        let my = &op.mass * &y;
        let small = generalized_eigen(&(y.transpose() * &ay), &(y.transpose() * &my))?;
        x = &y * &small.vectors;
        let ax = &ay * &small.vectors;
        let mx = &my * &small.vectors;
        let mut worst: f64 = 0.0;
        for k in 0..count {
            let r = ax.column(k) - small.values[k] * mx.column(k);
            worst = worst.max(r.amax());
        }
        if worst <= 1e-13 * scale || (worst <= 1e-10 * scale && worst >= 0.9 * last) {
            return Ok(Some(GeneralizedEigen { values: small.values, vectors: x }));
        }
        last = worst;
    }
    Ok(None)
}

/// [`low_modes`], falling back to the dense solve when iteration stalls.
pub fn low_modes_or_dense(op: &StabilityOperator, count: usize) -> Result<GeneralizedEigen> {
    if let Some(e) = low_modes(op, count)? {
        return Ok(e);
    }
    let e = op.eigen()?;
    let count = count.min(op.dimension());
    Ok(GeneralizedEigen {
        values: e.values.rows(0, count).into_owned(),
        vectors: e.vectors.columns(0, count).into_owned(),
    })
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Lowest eigenvalues of −J, ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<ScalarField>,
    /// ‖(−J − λ) f‖ in the induced L² norm.
    pub residuals: Vec<f64>,
}

impl SpectrumResult {
    /// Count of eigenvalues in the open interval (lo, hi).
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > lo && v < hi).count()
    }
}

pub fn low_spectrum(op: &StabilityOperator, n: usize) -> Result<SpectrumResult> {
    let dim = op.dimension();
    if n > dim {
        return Err(Error::Config(format!("requested {n} eigenvalues of a {dim}-dimensional operator")));
    }
    let eig = op.eigen()?;
    let chol = op.mass.clone().cholesky().ok_or_else(|| Error::Convergence("mass matrix".into()))?;
    let mut out = SpectrumResult { eigenvalues: Vec::with_capacity(n), eigenfields: Vec::new(), residuals: Vec::new() };
    for k in 0..n {
        let lam = eig.values[k];
        let c = eig.vectors.column(k).into_owned();
        let r = &op.matrix * &c - lam * (&op.mass * &c);
        // dual norm of the weak residual
        let res = r.dot(&chol.solve(&r)).max(0.0).sqrt();
        out.eigenvalues.push(lam);
        out.eigenfields.push(ScalarField::from_coeffs(op.grid(), c.as_slice().to_vec())?);
        out.residuals.push(res);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub boost_part: ScalarField,
    pub deform_part: ScalarField,
}

/// Splits a field into its linearized-boost part, spanned by eigenfields of
/// −Δ_γ with eigenvalue in [½, 7/2]·sinh⁻²σ, and the remainder.
pub fn canonical_partition(field: &ScalarField, op: &StabilityOperator) -> Result<Partition> {
    let s2 = op.surface.sigma.sinh().powi(2);
    let (lo, hi) = (0.5 / s2, 3.5 / s2);
    let eig = op.laplace_eigen()?;
    let band: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] >= lo && eig.values[k] <= hi).collect();
    if band.is_empty() {
        return Err(Error::Band);
    }
    let b = op.load_vector(field)?;
    let mut c = DVector::zeros(op.dimension());
    for &k in &band {
        let v = eig.vectors.column(k);
        c.axpy(v.dot(&b), &v, 1.0);
    }
    let boost_part = ScalarField::from_coeffs(op.grid(), c.as_slice().to_vec())?;
    let deform_part = field.sub(&boost_part);
    Ok(Partition { boost_part, deform_part })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlledInstability {
    pub satisfied: bool,
    pub lambda_min_meanzero: f64,
}

/// Smallest eigenvalue of −J on induced-mean-zero functions.
pub fn lambda_min_meanzero(op: &StabilityOperator) -> Result<f64> {
    let (lt, c) = reduce(&op.matrix, &op.mass)?;
    let n = op.dimension();
    // constants are u = e_0 √4π; in reduced coordinates their direction is Lᵀu
    let mut v = lt.column(0).into_owned();
    v.normalize_mut();
    let cv = &c * &v;
    let vcv = v.dot(&cv);
    // P C P with P = I − v vᵀ, plus a large shift along v
    let mut b = c.clone();
    b.ger(-1.0, &cv, &v, 1.0);
    b.ger(-1.0, &v, &cv, 1.0);
    let shift = c.amax() * n as f64 + 1.0;
    b.ger(vcv + shift, &v, &v, 1.0);
    let b = 0.5 * (&b + b.transpose());
    let eig = b.try_symmetric_eigen(1e-15, 0).ok_or_else(|| Error::Convergence("symmetric QR iteration".into()))?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn check_controlled_instability(surface: &GraphSurface, metric: &MetricField, alpha: f64) -> Result<ControlledInstability> {
    let op = assemble(surface, metric)?;
    controlled_instability(&op, alpha)
}

pub fn controlled_instability(op: &StabilityOperator, alpha: f64) -> Result<ControlledInstability> {
    let lam = lambda_min_meanzero(op)?;
    Ok(ControlledInstability { satisfied: lam >= alpha, lambda_min_meanzero: lam })
}

/// One row of the spectrum report.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub sigma: f64,
    pub lambdas: [f64; 8],
    /// 6 m_Haw / sinh³σ.
    pub hawking_term: f64,
}

pub const SPECTRUM_CSV_HEADER: &str =
    "sigma,lambda_0,lambda_1,lambda_2,lambda_3,lambda_4,lambda_5,lambda_6,lambda_7,6*mHaw/sinh^3(sigma)";

impl SpectrumRow {
    pub fn from_operator(op: &StabilityOperator) -> Result<Self> {
        let spec = low_spectrum(op, 8.min(op.dimension()))?;
        let mut lambdas = [f64::NAN; 8];
        lambdas[..spec.eigenvalues.len()].copy_from_slice(&spec.eigenvalues);
        let m = hawking_mass_from_forms(&op.forms, op.grid());
        let sigma = op.surface.sigma;
        Ok(SpectrumRow { sigma, lambdas, hawking_term: 6.0 * m / sigma.sinh().powi(3) })
    }

    pub fn to_csv(&self) -> String {
        let mut cols = vec![csv_float(self.sigma)];
        cols.extend(self.lambdas.iter().map(|v| csv_float(*v)));
        cols.push(csv_float(self.hawking_term));
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::Isometry;
    use crate::sphere::SphereGrid;

    #[test]
    fn sandwich_matches_dense_product() {
        let l = 3;
        let k = killing_matrices(l);
        let n = (l + 1) * (l + 1);
        let dense = |s: &SparseCols| {
            let mut d = DMatrix::zeros(n, n);
            for (c, col) in s.cols.iter().enumerate() {
                for &(r, v) in col {
                    d[(r, c)] = v;
                }
            }
            d
        };
        let g = DMatrix::from_fn(n, n, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let want = dense(&k[0]).transpose() * &g * dense(&k[2]);
        assert!((sandwich(&k[0], &g, &k[2]) - want).amax() < 1e-12);
    }

    #[test]
    fn geodesic_sphere_spectrum_is_constant_coefficient() {
        let grid = Arc::new(SphereGrid::new(8).unwrap());
        let sigma = 3.0;
        let s = GraphSurface::geodesic_sphere(&grid, Isometry::identity(), sigma).unwrap();
        let op = assemble(&s, &MetricField::hyperbolic()).unwrap();
        assert!(op.symmetry_defect < 1e-12);
        let spec = low_spectrum(&op, 9).unwrap();
        let s2 = sigma.sinh().powi(2);
        let want = [-2.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0, 4.0];
        for (v, w) in spec.eigenvalues.iter().zip(want) {
            assert!((v * s2 - w).abs() < 1e-9, "{} vs {w}", v * s2);
        }
        let fast = low_modes(&op, 9).unwrap().expect("block iteration converges");
        for (v, w) in fast.values.iter().zip(want) {
            assert!((v * s2 - w).abs() < 1e-9, "{} vs {w}", v * s2);
        }
    }
}
