//! One drifted coordinate killed at the ends of a symmetric interval.
//!
//! The process is dX = -a dt + dW on (-R, R), absorbed at the boundary
//! (generator: f''/2 - a f', Dirichlet conditions). Its transition density has
//! the spectral representation
//!
//! ```text
//! q~(t, x, y) = sum_i e^{-beta_i t} phi_i(x) phi_i(y) e^{-2 a y},
//! ```
//!
//! where (beta_i, phi_i) solve -L phi = beta phi with phi orthonormal in
//! L^2(e^{-2ax} dx). Two independent descriptions are kept side by side:
//!
//! * closed form: beta_i = a^2/2 + (i pi / (2R))^2 / 2 and
//!   phi_i(x) = e^{ax} sin(i pi (x + R) / (2R)) / sqrt(R);
//! * finite differences: the exponentially fitted scheme produces a symmetric
//!   Toeplitz matrix (diagonal cosh(a h)/h^2, off-diagonal -1/(2 h^2)) whose
//!   eigenvalues are known exactly, so the eigensolver itself can be checked
//!   to rounding before either route is trusted.
//!
//! Everything downstream (Green functions, ratio pipelines) consumes the
//! finite-difference eigensystem; the closed forms stay in tests as oracles.

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;

/// Spectral solver for the killed coordinate.
#[derive(Debug, Clone)]
pub struct KilledCoordinate {
    /// Drift rate a (the coordinate drifts toward -infinity for a > 0).
    pub rate: f64,
    /// Half-width R of the interval (-R, R).
    pub half_width: f64,
    /// Number of interior grid points.
    pub grid: usize,
    /// Number of retained eigenmodes.
    pub modes: usize,
    h: f64,
    xs: Vec<f64>,
    betas: Vec<f64>,
    /// phis[i][j]: phi_i at grid node j, normalized in L^2(e^{-2ax} dx).
    phis: Vec<Vec<f64>>,
}

impl KilledCoordinate {
    pub fn new(rate: f64, half_width: f64, grid: usize, modes: usize) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::domain(format!("rate must be >= 0, got {rate}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::domain("half-width must be positive"));
        }
        if grid < 8 {
            return Err(Error::domain("need at least 8 grid points"));
        }
        if modes == 0 || modes > grid {
            return Err(Error::domain(format!(
                "mode count {modes} outside 1..={grid}"
            )));
        }
        let h = 2.0 * half_width / (grid as f64 + 1.0);
        let diag = vec![(rate * h).cosh() / (h * h); grid];
        let off = vec![-0.5 / (h * h); grid - 1];
        let t = SymTridiag::new(diag, off)?;
        let pairs = t.smallest_eigenpairs(modes)?;
        let xs: Vec<f64> = (1..=grid)
            .map(|j| -half_width + h * j as f64)
            .collect();
        let mut betas = Vec::with_capacity(modes);
        let mut phis = Vec::with_capacity(modes);
        for (beta, v) in pairs {
            betas.push(beta);
            // Symmetrized eigenvector v (unit l^2) maps to the weighted
            // eigenfunction e^{a x} v / sqrt(h); the weight in the
            // normalization integral cancels the exponential exactly.
            let inv_sqrt_h = 1.0 / h.sqrt();
            let phi: Vec<f64> = xs
                .iter()
                .zip(v.iter())
                .map(|(&x, &vi)| (rate * x).exp() * vi * inv_sqrt_h)
                .collect();
            phis.push(phi);
        }
        Ok(KilledCoordinate {
            rate,
            half_width,
            grid,
            modes,
            h,
            xs,
            betas,
            phis,
        })
    }

    /// i-th smallest eigenvalue (0-indexed).
    pub fn beta(&self, i: usize) -> f64 {
        self.betas[i]
    }

    /// Principal eigenvalue: the exponential decay rate of survival.
    pub fn beta1(&self) -> f64 {
        self.betas[0]
    }

    /// Continuum eigenvalue a^2/2 + ((i pi)/(2R))^2 / 2 for mode i (1-based).
    pub fn continuum_beta(rate: f64, half_width: f64, i: usize) -> f64 {
        let k = i as f64 * std::f64::consts::PI / (2.0 * half_width);
        0.5 * rate * rate + 0.5 * k * k
    }

    /// Exact eigenvalue of the discrete operator for mode i (1-based):
    /// [cosh(a h) - cos(i pi h / (2R))] / h^2.
    pub fn toeplitz_beta(&self, i: usize) -> f64 {
        let theta = i as f64 * std::f64::consts::PI / (self.grid as f64 + 1.0);
        ((self.rate * self.h).cosh() - theta.cos()) / (self.h * self.h)
    }

    /// Continuum eigenfunction e^{ax} sin(i pi (x+R)/(2R)) / sqrt(R), mode i
    /// (1-based).
    pub fn continuum_phi(rate: f64, half_width: f64, i: usize, x: f64) -> f64 {
        if x.abs() >= half_width {
            return 0.0;
        }
        let s = (i as f64 * std::f64::consts::PI * (x + half_width) / (2.0 * half_width)).sin();
        (rate * x).exp() * s / half_width.sqrt()
    }

    /// phi_i at an arbitrary point by linear interpolation (0-indexed mode;
    /// zero at and beyond the boundary).
    pub fn phi(&self, i: usize, x: f64) -> Result<f64> {
        if i >= self.modes {
            return Err(Error::domain(format!(
                "mode {i} not computed (have {})",
                self.modes
            )));
        }
        Ok(self.interp(&self.phis[i], x))
    }

    fn interp(&self, vals: &[f64], x: f64) -> f64 {
        let r = self.half_width;
        if x <= -r || x >= r {
            return 0.0;
        }
        // Nodes sit at -R + h, ..., R - h; the boundary values are zero.
        let s = (x + r) / self.h; // in (0, grid + 1)
        let j = s.floor() as usize; // segment [j, j+1] in padded indexing
        let frac = s - j as f64;
        let left = if j == 0 { 0.0 } else { vals[j - 1] };
        let right = if j >= self.grid { 0.0 } else { vals[j] };
        left + (right - left) * frac
    }

    /// Transition density q~(t, x, y) with respect to dy.
    pub fn density(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be positive, got {t}")));
        }
        if x.abs() >= self.half_width || y.abs() >= self.half_width {
            return Ok(0.0);
        }
        let weight = (-2.0 * self.rate * y).exp();
        let mut s = 0.0;
        for i in 0..self.modes {
            let term = (-self.betas[i] * t).exp()
                * self.interp(&self.phis[i], x)
                * self.interp(&self.phis[i], y);
            s += term;
        }
        Ok(s * weight)
    }

    /// Free-space transition density of the same drifted motion (no killing):
    /// y ~ N(x - a t, t).
    pub fn free_density(rate: f64, t: f64, x: f64, y: f64) -> f64 {
        let d = y - x + rate * t;
        (-d * d / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
    }

    /// Survival probability at time t from x, by trapezoid over the grid.
    pub fn survival(&self, t: f64, x: f64) -> Result<f64> {
        let mut s = 0.0;
        for &y in &self.xs {
            s += self.density(t, x, y)?;
        }
        Ok(s * self.h)
    }

    /// Interior grid nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }
}
