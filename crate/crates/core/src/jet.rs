//! Third-order multivariate jets: forward-mode values with gradient, Hessian,
//! and third-derivative tensor, plus a validity order.
//!
//! A `Jet` carries the coefficient bands (value, gradient, Hessian, third
//! tensor) of a function at a point, together with `order`: how many
//! derivative bands are trustworthy. Taking a partial derivative shifts the
//! bands down and loses one order; arithmetic takes the minimum order of the
//! operands. Order-k output coefficients depend only on order-<=k input
//! coefficients, so stale bands never contaminate valid ones.
//!
//! All operations are total in IEEE arithmetic (division by zero produces
//! infinities rather than panicking); callers that need domain checking test
//! `is_finite` on the result.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Truncated third-order Taylor data of a scalar function of `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub dim: usize,
    /// Number of valid derivative bands: 3 = all, 0 = value only.
    pub order: usize,
    /// Function value.
    pub v: f64,
    /// Gradient, length `dim`.
    pub g: Vec<f64>,
    /// Hessian, row-major `dim * dim`, kept symmetric.
    pub h: Vec<f64>,
    /// Third derivatives, `dim^3`, kept fully symmetric.
    pub t: Vec<f64>,
}

impl Jet {
    pub fn constant(dim: usize, c: f64) -> Jet {
        Jet {
            dim,
            order: 3,
            v: c,
            g: vec![0.0; dim],
            h: vec![0.0; dim * dim],
            t: vec![0.0; dim * dim * dim],
        }
    }

    /// The coordinate function x_i evaluated at value `x`.
    pub fn variable(dim: usize, i: usize, x: f64) -> Jet {
        assert!(i < dim, "variable index {i} out of range for dim {dim}");
        let mut j = Jet::constant(dim, x);
        j.g[i] = 1.0;
        j
    }

    /// Jets of all coordinates at a point.
    pub fn variables(point: &[f64]) -> Vec<Jet> {
        let d = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(d, i, x))
            .collect()
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.dim + j]
    }

    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.t[(i * self.dim + j) * self.dim + k]
    }

    /// Partial derivative with respect to x_i: bands shift down one order.
    ///
    /// Panics if no derivative band is valid (`order == 0`); requesting a
    /// derivative there is a logic error in the caller, not a data condition.
    pub fn partial(&self, i: usize) -> Jet {
        assert!(
            self.order >= 1,
            "partial() on a jet with no valid derivative bands"
        );
        assert!(i < self.dim, "partial index {i} out of range");
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for a in 0..d {
            g[a] = self.hess(i, a);
            for b in 0..d {
                h[a * d + b] = self.third(i, a, b);
            }
        }
        Jet {
            dim: d,
            order: self.order - 1,
            v: self.g[i],
            g,
            h,
            t: vec![0.0; d * d * d],
        }
    }

    /// Composition with a scalar function given its derivatives at `self.v`:
    /// returns jets of f(u) from f(u.v) = f0, f' = f1, f'' = f2, f''' = f3.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Jet {
        let d = self.dim;
        let mut out = Jet {
            dim: d,
            order: self.order,
            v: f0,
            g: vec![0.0; d],
            h: vec![0.0; d * d],
            t: vec![0.0; d * d * d],
        };
        for i in 0..d {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..d {
            for j in 0..d {
                out.h[i * d + j] = f2 * self.g[i] * self.g[j] + f1 * self.hess(i, j);
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let gi = self.g[i];
                    let gj = self.g[j];
                    let gk = self.g[k];
                    out.t[(i * d + j) * d + k] = f3 * gi * gj * gk
                        + f2 * (self.hess(i, j) * gk + self.hess(i, k) * gj + self.hess(j, k) * gi)
                        + f1 * self.third(i, j, k);
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e, e)
    }

    /// Natural logarithm; infinite/NaN coefficients signal out-of-domain input.
    pub fn ln(&self) -> Jet {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.v.sqrt();
        self.chain(
            s,
            0.5 / s,
            -0.25 / (s * self.v),
            0.375 / (s * self.v * self.v),
        )
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s, -c)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c, s)
    }

    pub fn recip(&self) -> Jet {
        let x = self.v;
        self.chain(
            1.0 / x,
            -1.0 / (x * x),
            2.0 / (x * x * x),
            -6.0 / (x * x * x * x),
        )
    }

    /// Integer power, valid for any base (including negative and zero).
    pub fn powi(&self, n: i32) -> Jet {
        let x = self.v;
        let nf = n as f64;
        // x^(n-k) with integer exponents stays defined for x <= 0.
        let f0 = x.powi(n);
        let f1 = nf * x.powi(n - 1);
        let f2 = nf * (nf - 1.0) * x.powi(n - 2);
        let f3 = nf * (nf - 1.0) * (nf - 2.0) * x.powi(n - 3);
        self.chain(f0, f1, f2, f3)
    }

    /// Real power for positive base; non-positive base yields NaN bands.
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.v;
        self.chain(
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        )
    }

    /// Scale by a constant.
    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.v *= c;
        for x in out.g.iter_mut() {
            *x *= c;
        }
        for x in out.h.iter_mut() {
            *x *= c;
        }
        for x in out.t.iter_mut() {
            *x *= c;
        }
        out
    }

    /// True when every coefficient in every *valid* band is finite.
    pub fn is_finite(&self) -> bool {
        if !self.v.is_finite() {
            return false;
        }
        if self.order >= 1 && self.g.iter().any(|x| !x.is_finite()) {
            return false;
        }
        if self.order >= 2 && self.h.iter().any(|x| !x.is_finite()) {
            return false;
        }
        if self.order >= 3 && self.t.iter().any(|x| !x.is_finite()) {
            return false;
        }
        true
    }

    fn assert_same_dim(&self, other: &Jet) {
        assert_eq!(
            self.dim, other.dim,
            "jet dimension mismatch: {} vs {}",
            self.dim, other.dim
        );
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_same_dim(rhs);
        let mut out = self.clone();
        out.order = self.order.min(rhs.order);
        out.v += rhs.v;
        for (a, b) in out.g.iter_mut().zip(rhs.g.iter()) {
            *a += b;
        }
        for (a, b) in out.h.iter_mut().zip(rhs.h.iter()) {
            *a += b;
        }
        for (a, b) in out.t.iter_mut().zip(rhs.t.iter()) {
            *a += b;
        }
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_same_dim(rhs);
        let mut out = self.clone();
        out.order = self.order.min(rhs.order);
        out.v -= rhs.v;
        for (a, b) in out.g.iter_mut().zip(rhs.g.iter()) {
            *a -= b;
        }
        for (a, b) in out.h.iter_mut().zip(rhs.h.iter()) {
            *a -= b;
        }
        for (a, b) in out.t.iter_mut().zip(rhs.t.iter()) {
            *a -= b;
        }
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    /// Full third-order Leibniz rule (eight terms in the third band).
    fn mul(self, rhs: &Jet) -> Jet {
        self.assert_same_dim(rhs);
        let d = self.dim;
        let (u, w) = (self, rhs);
        let mut out = Jet {
            dim: d,
            order: u.order.min(w.order),
            v: u.v * w.v,
            g: vec![0.0; d],
            h: vec![0.0; d * d],
            t: vec![0.0; d * d * d],
        };
        for i in 0..d {
            out.g[i] = u.g[i] * w.v + u.v * w.g[i];
        }
        for i in 0..d {
            for j in 0..d {
                out.h[i * d + j] = u.hess(i, j) * w.v
                    + u.g[i] * w.g[j]
                    + u.g[j] * w.g[i]
                    + u.v * w.hess(i, j);
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out.t[(i * d + j) * d + k] = u.third(i, j, k) * w.v
                        + u.hess(i, j) * w.g[k]
                        + u.hess(i, k) * w.g[j]
                        + u.hess(j, k) * w.g[i]
                        + u.g[i] * w.hess(j, k)
                        + u.g[j] * w.hess(i, k)
                        + u.g[k] * w.hess(i, j)
                        + u.v * w.third(i, j, k);
                }
            }
        }
        out
    }
}

impl Div for &Jet {
    type Output = Jet;
    // Division is by definition multiplication by the reciprocal jet, which
    // carries the correct first and second derivatives of 1/x.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut out = self.clone();
        out.v += c;
        out
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// f(x, y) = e^x sin(y): every band has a closed form.
    #[test]
    fn product_and_chain_match_closed_form() {
        let (x, y) = (0.4f64, -0.7f64);
        let jx = Jet::variable(2, 0, x);
        let jy = Jet::variable(2, 1, y);
        let f = &jx.exp() * &jy.sin();
        let (ex, s, c) = (x.exp(), y.sin(), y.cos());
        assert_eq!(f.order, 3);
        assert_relative_eq!(f.v, ex * s, max_relative = 1e-15);
        assert_relative_eq!(f.g[0], ex * s, max_relative = 1e-15);
        assert_relative_eq!(f.g[1], ex * c, max_relative = 1e-15);
        assert_relative_eq!(f.hess(0, 0), ex * s, max_relative = 1e-15);
        assert_relative_eq!(f.hess(0, 1), ex * c, max_relative = 1e-15);
        assert_relative_eq!(f.hess(1, 1), -ex * s, max_relative = 1e-15);
        // d^3/dx dy^2 = -e^x sin y, d^3/dy^3 = -e^x cos y
        assert_relative_eq!(f.third(0, 1, 1), -ex * s, max_relative = 1e-14);
        assert_relative_eq!(f.third(1, 1, 1), -ex * c, max_relative = 1e-14);
        assert_relative_eq!(f.third(0, 0, 0), ex * s, max_relative = 1e-14);
    }

    #[test]
    fn quotient_matches_closed_form() {
        let (x, y) = (1.3f64, 0.5f64);
        let jx = Jet::variable(2, 0, x);
        let jy = Jet::variable(2, 1, y);
        let num = &(&jx * &jx) + 1.0;
        let den = &jy + 2.0;
        let f = &num / &den;
        let d = y + 2.0;
        assert_relative_eq!(f.v, (x * x + 1.0) / d, max_relative = 1e-14);
        assert_relative_eq!(f.g[0], 2.0 * x / d, max_relative = 1e-14);
        assert_relative_eq!(f.g[1], -(x * x + 1.0) / (d * d), max_relative = 1e-14);
        assert_relative_eq!(f.hess(0, 1), -2.0 * x / (d * d), max_relative = 1e-14);
        assert_relative_eq!(
            f.third(1, 1, 1),
            -6.0 * (x * x + 1.0) / (d * d * d * d),
            max_relative = 1e-13
        );
        assert_relative_eq!(f.third(0, 0, 1), -2.0 / (d * d), max_relative = 1e-13);
    }

    #[test]
    fn ln_of_exp_is_identity() {
        let j = Jet::variable(1, 0, 0.8);
        let f = j.exp().ln();
        assert_relative_eq!(f.v, 0.8, max_relative = 1e-14);
        assert_relative_eq!(f.g[0], 1.0, max_relative = 1e-13);
        assert!(f.hess(0, 0).abs() < 1e-13);
        assert!(f.third(0, 0, 0).abs() < 1e-12);
    }

    #[test]
    fn partial_shifts_bands_and_order() {
        // f = x^3 y: f_x = 3x^2 y, (f_x)_x = 6xy, (f_x)_xy = 6x
        let (x, y) = (1.1f64, 2.3f64);
        let f = &Jet::variable(2, 0, x).powi(3) * &Jet::variable(2, 1, y);
        let fx = f.partial(0);
        assert_eq!(fx.order, 2);
        assert_relative_eq!(fx.v, 3.0 * x * x * y, max_relative = 1e-14);
        assert_relative_eq!(fx.g[0], 6.0 * x * y, max_relative = 1e-14);
        assert_relative_eq!(fx.hess(0, 1), 6.0 * x, max_relative = 1e-14);
        let fxy = fx.partial(1);
        assert_eq!(fxy.order, 1);
        assert_relative_eq!(fxy.v, 3.0 * x * x, max_relative = 1e-14);
        assert_relative_eq!(fxy.g[0], 6.0 * x, max_relative = 1e-14);
    }

    #[test]
    fn order_takes_minimum_under_arithmetic() {
        let a = Jet::variable(1, 0, 2.0); // order 3
        let b = a.partial(0); // order 2
        assert_eq!((&a + &b).order, 2);
        assert_eq!((&a * &b).order, 2);
        assert_eq!((&a * &a).order, 3);
    }

    #[test]
    fn powi_handles_negative_base() {
        let j = Jet::variable(1, 0, -1.5);
        let f = j.powi(3);
        assert_relative_eq!(f.v, -3.375, max_relative = 1e-14);
        assert_relative_eq!(f.g[0], 3.0 * 2.25, max_relative = 1e-14);
        assert_relative_eq!(f.hess(0, 0), -9.0, max_relative = 1e-14);
        assert_relative_eq!(f.third(0, 0, 0), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn bands_stay_symmetric() {
        let jx = Jet::variable(3, 0, 0.3);
        let jy = Jet::variable(3, 1, 0.9);
        let jz = Jet::variable(3, 2, -0.2);
        let f = &(&jx.sin() * &jy.exp()) / &(&jz.powi(2) + 1.0);
        let d = 3;
        for i in 0..d {
            for j in 0..d {
                assert_relative_eq!(f.hess(i, j), f.hess(j, i), max_relative = 1e-12);
                for k in 0..d {
                    let t = f.third(i, j, k);
                    for p in [
                        f.third(i, k, j),
                        f.third(j, i, k),
                        f.third(j, k, i),
                        f.third(k, i, j),
                        f.third(k, j, i),
                    ] {
                        assert_relative_eq!(t, p, max_relative = 1e-11, epsilon = 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn division_by_zero_is_detectable() {
        let j = Jet::constant(1, 0.0);
        let f = Jet::constant(1, 1.0);
        let q = &f / &j;
        assert!(!q.is_finite());
    }
}
