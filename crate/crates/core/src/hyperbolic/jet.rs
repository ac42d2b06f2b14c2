//! Second-order forward-mode jets in three variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to the chart coordinates, so metric components written once in
//! closed form yield exact first and second derivatives.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet {
    pub const ZERO: Jet = Jet { v: 0.0, g: [0.0; 3], h: [[0.0; 3]; 3] };

    pub fn constant(v: f64) -> Self {
        Jet { v, ..Jet::ZERO }
    }

    /// The coordinate function x_k.
    pub fn variable(v: f64, k: usize) -> Self {
        let mut j = Jet::constant(v);
        j.g[k] = 1.0;
        j
    }

    pub fn point(x: [f64; 3]) -> [Jet; 3] {
        [Jet::variable(x[0], 0), Jet::variable(x[1], 1), Jet::variable(x[2], 2)]
    }

    /// Applies a scalar function given its value and first two derivatives.
    #[inline]
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        for i in 0..3 {
            out.g[i] = f1 * self.g[i];
            for j in 0..3 {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn scale(self, s: f64) -> Jet {
        let mut out = self;
        out.v *= s;
        for i in 0..3 {
            out.g[i] *= s;
            for j in 0..3 {
                out.h[i][j] *= s;
            }
        }
        out
    }

    pub fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sinh(self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn asinh(self) -> Jet {
        let q = 1.0 + self.v * self.v;
        let d1 = 1.0 / q.sqrt();
        self.chain(self.v.asinh(), d1, -self.v * d1 / q)
    }

    pub fn powi(self, n: i32) -> Jet {
        match n {
            0 => Jet::constant(1.0),
            1 => self,
            _ => {
                let p2 = self.v.powi(n - 2);
                let nf = n as f64;
                self.chain(p2 * self.v * self.v, nf * p2 * self.v, nf * (nf - 1.0) * p2)
            }
        }
    }

    /// sinh(x)/x, stable near zero.
    pub fn sinhc(self) -> Jet {
        let x = self.v;
        if x.abs() < 1e-3 {
            let x2 = x * x;
            let f0 = 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
            let f1 = x / 3.0 + x * x2 / 30.0;
            let f2 = 1.0 / 3.0 + x2 / 10.0;
            self.chain(f0, f1, f2)
        } else {
            let (s, c) = (x.sinh(), x.cosh());
            let f0 = s / x;
            let f1 = (c * x - s) / (x * x);
            let f2 = (s * x * x - 2.0 * c * x + 2.0 * s) / (x * x * x);
            self.chain(f0, f1, f2)
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for i in 0..3 {
            self.g[i] += o.g[i];
            for j in 0..3 {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for j in 0..3 {
                out.h[i][j] = self.v * o.h[i][j]
                    + o.v * self.h[i][j]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

/// Symmetric 3x3 matrix of jets.
pub type JetMat = [[Jet; 3]; 3];

pub fn jet_mat_zero() -> JetMat {
    [[Jet::ZERO; 3]; 3]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn([Jet; 3]) -> Jet, x: [f64; 3]) {
        let j = f(Jet::point(x));
        let val = |y: [f64; 3]| f(Jet::point(y)).v;
        let h = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let d = (val(xp) - val(xm)) / (2.0 * h);
            assert!((d - j.g[k]).abs() < 1e-7 * (1.0 + d.abs()), "grad {k}: {d} vs {}", j.g[k]);
            let gp = f(Jet::point(xp)).g;
            let gm = f(Jet::point(xm)).g;
            for l in 0..3 {
                let d2 = (gp[l] - gm[l]) / (2.0 * h);
                assert!((d2 - j.h[k][l]).abs() < 1e-6 * (1.0 + d2.abs()), "hess {k}{l}");
            }
        }
    }

    #[test]
    fn jets_match_central_differences() {
        let x = [0.7, -0.4, 1.3];
        fd_check(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt().sinh() * p[0], x);
        fd_check(|p| (p[0] * p[1]).exp() / (p[2] + 3.0), x);
        fd_check(|p| (p[0] * p[0] + p[2]).asinh().ln().powi(3), [1.1, 0.2, 0.9]);
        fd_check(|p| (p[0] * p[1] + p[2]).sinhc(), x);
        fd_check(|p| (p[0] * 1e-4 + p[1] * 1e-5).sinhc() * p[2].cosh(), x);
    }
}
