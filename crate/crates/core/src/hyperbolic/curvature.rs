//! Pointwise curvature of g = h + e.
//!
//! The connection is split as Γ(g) = Γ(h) + C and the curvature as
//! Riem(h) + δRiem, with Riem(h) known in closed form. Only C and its
//! h-covariant derivative are formed numerically, so Ric + 2h and S + 6 are
//! obtained without subtracting large nearly equal numbers.

use nalgebra::Matrix3;

use super::isometry::norm3;
use super::jet::Jet;
use super::metric::{hyperbolic_jet, MetricField, TensorJet};
use crate::error::{Error, Result};

pub type T3 = [[[f64; 3]; 3]; 3];
pub type T4 = [[[[f64; 3]; 3]; 3]; 3];

/// Curvature data at a single chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub x: [f64; 3],
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    /// Deviation e = g − h.
    pub e: Matrix3<f64>,
    /// christoffels[k][i][j] = Γ^k_ij of g.
    pub christoffels: T3,
    pub ricci: Matrix3<f64>,
    /// Ric(g) − Ric(h) = Ric(g) + 2h.
    pub delta_ricci: Matrix3<f64>,
    pub scalar: f64,
    /// S + 6, computed without cancellation.
    pub scalar_defect: f64,
    /// Ric − (S/2 + 1) g.
    pub einstein: Matrix3<f64>,
    /// riemann[a][b][c][d] = R^a_bcd.
    pub riemann: T4,
}

impl CurvatureSample {
    /// R(X, Y, Z, W) = g(R(Z, W)Y, X) with all indices lowered: R_abcd.
    pub fn riemann_lower(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        (0..3).map(|e| self.g[(a, e)] * self.riemann[e][b][c][d]).sum()
    }
}

struct Reference {
    h: [[f64; 3]; 3],
    dh: T3,
    gam: T3,
    dgam: T4, // dgam[m][k][i][j] = ∂_m Γh^k_ij
}

fn reference(x: [f64; 3]) -> Reference {
    let hj = hyperbolic_jet(Jet::point(x));
    let t = TensorJet::from_jets(&hj);
    let hm = Matrix3::from_fn(|i, j| t.v[i][j]);
    let hinv = hm.try_inverse().expect("reference metric is positive definite");
    let mut low = [[[0.0; 3]; 3]; 3]; // low[l][i][j]
    let mut dlow = [[[[0.0; 3]; 3]; 3]; 3]; // dlow[m][l][i][j]
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                low[l][i][j] = 0.5 * (t.d[i][j][l] + t.d[j][i][l] - t.d[l][i][j]);
                for m in 0..3 {
                    dlow[m][l][i][j] = 0.5 * (t.dd[m][i][j][l] + t.dd[m][j][i][l] - t.dd[m][l][i][j]);
                }
            }
        }
    }
    // ∂_m h^{kl} = −h^{ka} ∂_m h_ab h^{bl}
    let mut dhinv = [[[0.0; 3]; 3]; 3];
    for m in 0..3 {
        let dm = Matrix3::from_fn(|a, b| t.d[m][a][b]);
        let r = -(hinv * dm * hinv);
        for k in 0..3 {
            for l in 0..3 {
                dhinv[m][k][l] = r[(k, l)];
            }
        }
    }
    let mut gam = [[[0.0; 3]; 3]; 3];
    let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += hinv[(k, l)] * low[l][i][j];
                }
                gam[k][i][j] = s;
                for m in 0..3 {
                    let mut d = 0.0;
                    for l in 0..3 {
                        d += dhinv[m][k][l] * low[l][i][j] + hinv[(k, l)] * dlow[m][l][i][j];
                    }
                    dgam[m][k][i][j] = d;
                }
            }
        }
    }
    Reference { h: t.v, dh: t.d, gam, dgam }
}

/// Curvature of `metric` at `x`.
pub fn eval_curvature(metric: &MetricField, x: [f64; 3]) -> Result<CurvatureSample> {
    let e = metric.deviation(x)?;
    curvature_from_deviation(x, &e)
}

/// Metric and Christoffel symbols Γ^k_ij of `metric` at `x`, without curvature.
pub fn christoffels(metric: &MetricField, x: [f64; 3]) -> Result<(Matrix3<f64>, T3)> {
    let e = metric.deviation(x)?;
    let rf = reference(x);
    let g = Matrix3::from_fn(|i, j| rf.h[i][j] + e.v[i][j]);
    let g_inv = g
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("metric is not positive definite at {x:?}")))?
        .inverse();
    let mut n = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.5 * (e.d[i][j][l] + e.d[j][i][l] - e.d[l][i][j]);
                for b in 0..3 {
                    s -= e.v[l][b] * rf.gam[b][i][j];
                }
                n[l][i][j] = s;
            }
        }
    }
    let mut gam = rf.gam;
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                gam[k][i][j] += (0..3).map(|l| g_inv[(k, l)] * n[l][i][j]).sum::<f64>();
            }
        }
    }
    Ok((g, gam))
}

/// Curvature from a deviation jet (value, first and second derivatives).
pub fn curvature_from_deviation(x: [f64; 3], e: &TensorJet) -> Result<CurvatureSample> {
    let rf = reference(x);
    let g = Matrix3::from_fn(|i, j| rf.h[i][j] + e.v[i][j]);
    let g_inv = g
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("metric is not positive definite at {x:?} (r = {})", norm3(x))))?
        .inverse();
    // N_lij = E_ijl − e_lb Γh^b_ij
    let mut n = [[[0.0; 3]; 3]; 3];
    let mut dn = [[[[0.0; 3]; 3]; 3]; 3]; // dn[m][l][i][j]
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let ecov = 0.5 * (e.d[i][j][l] + e.d[j][i][l] - e.d[l][i][j]);
                let mut s = ecov;
                for b in 0..3 {
                    s -= e.v[l][b] * rf.gam[b][i][j];
                }
                n[l][i][j] = s;
                for m in 0..3 {
                    let mut d = 0.5 * (e.dd[m][i][j][l] + e.dd[m][j][i][l] - e.dd[m][l][i][j]);
                    for b in 0..3 {
                        d -= e.d[m][l][b] * rf.gam[b][i][j] + e.v[l][b] * rf.dgam[m][b][i][j];
                    }
                    dn[m][l][i][j] = d;
                }
            }
        }
    }
    let mut dginv = [[[0.0; 3]; 3]; 3];
    for m in 0..3 {
        let dm = Matrix3::from_fn(|a, b| rf.dh[m][a][b] + e.d[m][a][b]);
        let r = -(g_inv * dm * g_inv);
        for k in 0..3 {
            for l in 0..3 {
                dginv[m][k][l] = r[(k, l)];
            }
        }
    }
    let mut c = [[[0.0; 3]; 3]; 3];
    let mut dc = [[[[0.0; 3]; 3]; 3]; 3]; // dc[m][k][i][j]
    for k in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += g_inv[(k, l)] * n[l][i][j];
                }
                c[k][i][j] = s;
                c[k][j][i] = s;
                for m in 0..3 {
                    let mut d = 0.0;
                    for l in 0..3 {
                        d += dginv[m][k][l] * n[l][i][j] + g_inv[(k, l)] * dn[m][l][i][j];
                    }
                    dc[m][k][i][j] = d;
                    dc[m][k][j][i] = d;
                }
            }
        }
    }
    // nab[c][a][d][b] = (∇^h_c C)^a_db
    let mut nab = [[[[0.0; 3]; 3]; 3]; 3];
    for cc in 0..3 {
        for a in 0..3 {
            for d in 0..3 {
                for b in 0..3 {
                    let mut s = dc[cc][a][d][b];
                    for q in 0..3 {
                        s += rf.gam[a][cc][q] * c[q][d][b]
                            - rf.gam[q][cc][d] * c[a][q][b]
                            - rf.gam[q][cc][b] * c[a][d][q];
                    }
                    nab[cc][a][d][b] = s;
                }
            }
        }
    }
    let mut riemann = [[[[0.0; 3]; 3]; 3]; 3];
    let mut delta_ricci = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            for cc in 0..3 {
                for d in 0..3 {
                    if cc == d {
                        continue;
                    }
                    let mut s = nab[cc][a][d][b] - nab[d][a][cc][b];
                    for q in 0..3 {
                        s += c[a][cc][q] * c[q][d][b] - c[a][d][q] * c[q][cc][b];
                    }
                    if a == cc {
                        delta_ricci[(b, d)] += s;
                    }
                    let mut base = 0.0;
                    if a == cc {
                        base -= rf.h[d][b];
                    }
                    if a == d {
                        base += rf.h[cc][b];
                    }
                    riemann[a][b][cc][d] = base + s;
                }
            }
        }
    }
    let dr: Matrix3<f64> = delta_ricci;
    let delta_ricci: Matrix3<f64> = 0.5 * (dr + dr.transpose());
    let em = Matrix3::from_fn(|i, j| e.v[i][j]);
    let h = Matrix3::from_fn(|i, j| rf.h[i][j]);
    let scalar_defect = 2.0 * g_inv.component_mul(&em).sum() + g_inv.component_mul(&delta_ricci).sum();
    let ricci = -2.0 * h + delta_ricci;
    let einstein = delta_ricci + 2.0 * em - 0.5 * scalar_defect * g;
    let mut christoffels = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                christoffels[k][i][j] = rf.gam[k][i][j] + c[k][i][j];
            }
        }
    }
    Ok(CurvatureSample {
        x,
        g,
        g_inv,
        e: em,
        christoffels,
        ricci,
        delta_ricci,
        scalar: -6.0 + scalar_defect,
        scalar_defect,
        einstein,
        riemann,
    })
}

/// Γh^k_ij of the reference metric.
pub fn reference_christoffels(x: [f64; 3]) -> T3 {
    reference(x).gam
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::metric::eval_metric;

    /// Brute-force curvature from central differences of the full metric.
    fn fd_ricci(metric: &MetricField, x: [f64; 3], h: f64) -> Matrix3<f64> {
        let gam = |y: [f64; 3]| -> T3 {
            let g = eval_metric(metric, y).unwrap();
            let gi = g.try_inverse().unwrap();
            let mut dg = [[[0.0; 3]; 3]; 3];
            for k in 0..3 {
                let mut p = y;
                let mut m = y;
                p[k] += h;
                m[k] -= h;
                let gp = eval_metric(metric, p).unwrap();
                let gm = eval_metric(metric, m).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        dg[k][i][j] = (gp[(i, j)] - gm[(i, j)]) / (2.0 * h);
                    }
                }
            }
            let mut out = [[[0.0; 3]; 3]; 3];
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        for l in 0..3 {
                            out[k][i][j] += 0.5 * gi[(k, l)] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                        }
                    }
                }
            }
            out
        };
        let g0 = gam(x);
        let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
        for m in 0..3 {
            let mut p = x;
            let mut q = x;
            p[m] += h;
            q[m] -= h;
            let (a, b) = (gam(p), gam(q));
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        dgam[m][k][i][j] = (a[k][i][j] - b[k][i][j]) / (2.0 * h);
                    }
                }
            }
        }
        Matrix3::from_fn(|b, d| {
            let mut s = 0.0;
            for a in 0..3 {
                s += dgam[a][a][d][b] - dgam[d][a][a][b];
                for e in 0..3 {
                    s += g0[a][a][e] * g0[e][d][b] - g0[a][d][e] * g0[e][a][b];
                }
            }
            s
        })
    }

    #[test]
    fn hyperbolic_curvature_is_constant() {
        let g = MetricField::hyperbolic();
        for x in [[0.0, 0.0, 0.0], [0.2, 0.0, 0.1], [1.0, 2.0, -3.0]] {
            let c = eval_curvature(&g, x).unwrap();
            assert_eq!(c.scalar, -6.0);
            assert!((c.ricci + 2.0 * c.g).abs().max() < 1e-12 * c.g.abs().max());
        }
    }

    #[test]
    fn split_curvature_matches_brute_force() {
        let g = MetricField::ads_schwarzschild(1.0).unwrap();
        let x = [0.8, -0.5, 0.9];
        let c = eval_curvature(&g, x).unwrap();
        let r = fd_ricci(&g, x, 1e-4);
        assert!((c.ricci - r).abs().max() < 1e-5, "{}", (c.ricci - r).abs().max());
    }
}
