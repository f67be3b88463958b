//! Diagonal Ornstein-Uhlenbeck semigroups evaluated by Gaussian quadrature.
//!
//! The model is dX = -A X dt + dW on R^d with A = diag(a_1, ..., a_d), a_n > 0
//! (generator: half-Laplacian plus drift -<Ax, grad>). Its semigroup has the
//! exact representation
//!
//! ```text
//! P_t f(x) = E[ f(Z + e^{-tA} x) ],   Z ~ N(0, Q_t),
//! Q_t = diag((1 - e^{-2 a_n t}) / (2 a_n)),
//! ```
//!
//! so every application reduces to a Gaussian expectation, evaluated here with
//! tensorized Gauss-Hermite rules. The same Gaussian computed as a density
//! against N(0, Q_t) gives the change-of-measure factor
//!
//! ```text
//! J_t(x, z) = exp( <L_t x, Q_t^{-1/2} z> - |L_t x|^2 / 2 ),
//! L_t = Q_t^{-1/2} e^{-tA} = diag( sqrt(2 a_n / (e^{2 a_n t} - 1)) ),
//! ```
//!
//! whose columns shrink like 1/sqrt(t) *uniformly in the rates*: that factor
//! is what turns quadrature sums into dimension-free gradient bounds, and the
//! checks here exercise it with both routes side by side.

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, MultiIndex, TENSOR_BUDGET};

/// Diagonal generator rates a_1, ..., a_d (all positive).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectralModel {
    pub rates: Vec<f64>,
}

/// Both sides of the pointwise gradient estimate, computed by quadrature.
#[derive(Debug, Clone, Copy)]
pub struct GradientBound {
    /// Directional derivative of P_t f at x along u (density route).
    pub derivative: f64,
    /// |L_t u| * sqrt(P_t f^2 (x)): the model bound.
    pub model_bound: f64,
    /// Same with the discrete second moment of the score in place of |L_t u|^2;
    /// dominates |derivative| by the Cauchy-Schwarz inequality applied to the
    /// quadrature sum itself, so it is nonnegative-slack by construction.
    pub discrete_bound: f64,
}

impl SpectralModel {
    pub fn new(rates: Vec<f64>) -> Result<SpectralModel> {
        if rates.is_empty() {
            return Err(Error::dimension("spectral model needs at least one rate"));
        }
        if rates.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::domain("rates must be finite and positive"));
        }
        Ok(SpectralModel { rates })
    }

    /// Rates a_n = n^p for n = 1..=dim. Summability of 1/a_n (p > 1) is what
    /// the infinite-dimensional limits rely on, so it is enforced here.
    pub fn power_law(dim: usize, p: f64) -> Result<SpectralModel> {
        if !(p > 1.0) {
            return Err(Error::domain(format!(
                "power-law exponent must exceed 1, got {p}"
            )));
        }
        SpectralModel::new((1..=dim).map(|n| (n as f64).powf(p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    /// Variance of the n-th coordinate at time t:
    /// (1 - e^{-2 a t}) / (2 a), stable down to t near the underflow threshold.
    pub fn qt_eigenvalue(a: f64, t: f64) -> f64 {
        -(-2.0 * a * t).exp_m1() / (2.0 * a)
    }

    /// sqrt(2 a / (e^{2 a t} - 1)), the n-th diagonal entry of
    /// Q_t^{-1/2} e^{-tA}; bounded by 1/sqrt(t) for every rate a.
    pub fn lambda_factor(a: f64, t: f64) -> f64 {
        (2.0 * a / (2.0 * a * t).exp_m1()).sqrt()
    }

    /// Transition density of a single coordinate with rate a:
    /// y ~ N(e^{-a t} x, q_t(a)).
    pub fn transition_density_1d(a: f64, t: f64, x: f64, y: f64) -> f64 {
        let q = Self::qt_eigenvalue(a, t);
        let m = (-a * t).exp() * x;
        (-(y - m) * (y - m) / (2.0 * q)).exp() / (2.0 * std::f64::consts::PI * q).sqrt()
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be positive, got {t}")));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dimension(format!(
                "{what} has dimension {}, model has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// All coordinate variances at time t.
    pub fn qt(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        Ok(self
            .rates
            .iter()
            .map(|&a| Self::qt_eigenvalue(a, t))
            .collect())
    }

    /// trace Q_t = sum of coordinate variances.
    pub fn trace_qt(&self, t: f64) -> Result<f64> {
        Ok(self.qt(t)?.iter().sum())
    }

    /// e^{-tA} x.
    pub fn decay_apply(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        self.check_point(x, "point")?;
        Ok(self
            .rates
            .iter()
            .zip(x.iter())
            .map(|(&a, &xi)| (-a * t).exp() * xi)
            .collect())
    }

    /// L_t u componentwise.
    pub fn lambda_apply(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        self.check_point(u, "direction")?;
        Ok(self
            .rates
            .iter()
            .zip(u.iter())
            .map(|(&a, &ui)| Self::lambda_factor(a, t) * ui)
            .collect())
    }

    /// Change-of-measure factor J_t(x, z) relating the Gaussian centered at
    /// e^{-tA} x to the centered one.
    pub fn cameron_martin_density(&self, t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        self.check_point(x, "point")?;
        self.check_point(z, "sample")?;
        let mut dot = 0.0;
        let mut norm2 = 0.0;
        for ((&a, &xi), &zi) in self.rates.iter().zip(x.iter()).zip(z.iter()) {
            let lam = Self::lambda_factor(a, t) * xi;
            let q = Self::qt_eigenvalue(a, t);
            dot += lam * zi / q.sqrt();
            norm2 += lam * lam;
        }
        Ok((dot - 0.5 * norm2).exp())
    }

    fn tensor_rule(&self, order: usize) -> Result<GaussHermite> {
        let d = self.dim() as u32;
        let points = (order as f64).powi(d as i32);
        if !(points <= TENSOR_BUDGET as f64) {
            return Err(Error::Capacity(format!(
                "tensor rule needs {order}^{d} = {points:.3e} points, budget is {TENSOR_BUDGET}"
            )));
        }
        GaussHermite::new(order)
    }

    /// P_t f(x) by the shift route: Gauss-Hermite in each coordinate around
    /// the decayed mean.
    pub fn mehler_apply(
        &self,
        t: f64,
        x: &[f64],
        order: usize,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<f64> {
        Self::check_time(t)?;
        self.check_point(x, "point")?;
        let gh = self.tensor_rule(order)?;
        let d = self.dim();
        let mean = self.decay_apply(t, x)?;
        let sigmas: Vec<f64> = self
            .rates
            .iter()
            .map(|&a| (2.0 * Self::qt_eigenvalue(a, t)).sqrt())
            .collect();
        let norm = std::f64::consts::PI.powf(-(d as f64) / 2.0);
        let mut acc = 0.0;
        let mut z = vec![0.0f64; d];
        for idx in MultiIndex::new(d, order) {
            let mut w = norm;
            for (n, &i) in idx.iter().enumerate() {
                w *= gh.weights[i];
                z[n] = mean[n] + sigmas[n] * gh.nodes[i];
            }
            acc += w * f(&z);
        }
        Ok(acc)
    }

    /// P_t f(x) by the density route: expectation of J_t(x, Z) f(Z) under the
    /// *centered* Gaussian. Agrees with [`Self::mehler_apply`] up to quadrature
    /// error; the two together form the dual-route consistency check.
    pub fn density_apply(
        &self,
        t: f64,
        x: &[f64],
        order: usize,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<f64> {
        Self::check_time(t)?;
        self.check_point(x, "point")?;
        let gh = self.tensor_rule(order)?;
        let d = self.dim();
        let sigmas: Vec<f64> = self
            .rates
            .iter()
            .map(|&a| (2.0 * Self::qt_eigenvalue(a, t)).sqrt())
            .collect();
        let norm = std::f64::consts::PI.powf(-(d as f64) / 2.0);
        let mut acc = 0.0;
        let mut z = vec![0.0f64; d];
        for idx in MultiIndex::new(d, order) {
            let mut w = norm;
            for (n, &i) in idx.iter().enumerate() {
                w *= gh.weights[i];
                z[n] = sigmas[n] * gh.nodes[i];
            }
            acc += w * self.cameron_martin_density(t, x, &z)? * f(&z);
        }
        Ok(acc)
    }

    /// Directional gradient bound for P_t f at x along u, all three numbers
    /// from one quadrature pass. `f` must be bounded on the effective support
    /// of the Gaussian for the numbers to mean anything; no smoothness of `f`
    /// enters anywhere.
    pub fn gradient_bound_check(
        &self,
        t: f64,
        x: &[f64],
        u: &[f64],
        order: usize,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<GradientBound> {
        Self::check_time(t)?;
        self.check_point(x, "point")?;
        self.check_point(u, "direction")?;
        let gh = self.tensor_rule(order)?;
        let d = self.dim();
        let lam_u = self.lambda_apply(t, u)?;
        let lam_x = self.lambda_apply(t, x)?;
        let sigmas: Vec<f64> = self
            .rates
            .iter()
            .map(|&a| (2.0 * Self::qt_eigenvalue(a, t)).sqrt())
            .collect();
        let qs: Vec<f64> = self
            .rates
            .iter()
            .map(|&a| Self::qt_eigenvalue(a, t).sqrt())
            .collect();
        let norm = std::f64::consts::PI.powf(-(d as f64) / 2.0);
        // One pass accumulates E[J S f], E[J S^2], E[J f^2] with
        // S(z) = <L_t u, Q_t^{-1/2} z - L_t x>, the score along u.
        let mut e_jsf = 0.0;
        let mut e_js2 = 0.0;
        let mut e_jf2 = 0.0;
        let mut z = vec![0.0f64; d];
        for idx in MultiIndex::new(d, order) {
            let mut w = norm;
            for (n, &i) in idx.iter().enumerate() {
                w *= gh.weights[i];
                z[n] = sigmas[n] * gh.nodes[i];
            }
            let j = self.cameron_martin_density(t, x, &z)?;
            let mut s = 0.0;
            for n in 0..d {
                s += lam_u[n] * (z[n] / qs[n] - lam_x[n]);
            }
            let fv = f(&z);
            e_jsf += w * j * s * fv;
            e_js2 += w * j * s * s;
            e_jf2 += w * j * fv * fv;
        }
        let lam_u_norm2: f64 = lam_u.iter().map(|v| v * v).sum();
        Ok(GradientBound {
            derivative: e_jsf,
            model_bound: (lam_u_norm2 * e_jf2.max(0.0)).sqrt(),
            discrete_bound: (e_js2.max(0.0) * e_jf2.max(0.0)).sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn variance_is_stable_at_tiny_times() {
        // (1 - e^{-2at})/(2a) -> t as t -> 0; the expm1 route keeps full
        // precision where the naive difference would lose every digit.
        let q = SpectralModel::qt_eigenvalue(1.0, 1e-300);
        assert_relative_eq!(q, 1e-300, max_relative = 1e-15);
        let q2 = SpectralModel::qt_eigenvalue(3.0, 1e-9);
        assert_relative_eq!(q2, 1e-9 * (1.0 - 3e-9), max_relative = 1e-12);
    }

    #[test]
    fn variance_envelope() {
        // q_t(a) <= min(t, 1/(2a)), nondecreasing in t, strictly so until the
        // exponential saturates to the stationary variance 1/(2a).
        for &a in &[0.5, 1.0, 64.0, 4096.0] {
            let mut prev = 0.0;
            for &t in &[1e-6, 1e-3, 0.1, 1.0, 10.0] {
                let q = SpectralModel::qt_eigenvalue(a, t);
                assert!(q <= t.min(1.0 / (2.0 * a)) * (1.0 + 1e-15));
                assert!(q >= prev);
                if 2.0 * a * t < 30.0 {
                    assert!(q > prev);
                }
                prev = q;
            }
            assert_relative_eq!(
                SpectralModel::qt_eigenvalue(a, 1e6),
                1.0 / (2.0 * a),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn lambda_factor_is_uniformly_bounded() {
        // sqrt(2a/(e^{2at}-1)) <= 1/sqrt(t) for every rate; decreasing in a.
        for &t in &[1e-4, 0.01, 0.5, 3.0] {
            let mut prev = f64::INFINITY;
            for &a in &[1e-8, 1e-3, 1.0, 100.0, 1e6] {
                let l = SpectralModel::lambda_factor(a, t);
                assert!(l <= 1.0 / t.sqrt() * (1.0 + 1e-14), "a={a} t={t}");
                assert!(l <= prev * (1.0 + 1e-14));
                prev = l;
            }
            // The a -> 0 limit saturates the bound.
            assert_relative_eq!(
                SpectralModel::lambda_factor(1e-12, t),
                1.0 / t.sqrt(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn constants_and_linears_are_exact() {
        let m = SpectralModel::new(vec![1.0, 4.0]).unwrap();
        let x = [0.7, -1.2];
        let one = m.mehler_apply(0.3, &x, 8, |_| 1.0).unwrap();
        assert_relative_eq!(one, 1.0, max_relative = 1e-14);
        let lin = m.mehler_apply(0.3, &x, 8, |z| z[1]).unwrap();
        assert_relative_eq!(lin, (-4.0f64 * 0.3).exp() * -1.2, max_relative = 1e-13);
    }

    #[test]
    fn quadratic_matches_closed_form() {
        // P_t x_n^2 = e^{-2 a t} x_n^2 + q_t(a).
        let m = SpectralModel::new(vec![2.0]).unwrap();
        let t = 0.4;
        let v = m.mehler_apply(t, &[1.3], 6, |z| z[0] * z[0]).unwrap();
        let exact = (-2.0f64 * 2.0 * t).exp() * 1.69 + SpectralModel::qt_eigenvalue(2.0, t);
        assert_relative_eq!(v, exact, max_relative = 1e-13);
    }

    #[test]
    fn shift_and_density_routes_agree() {
        let m = SpectralModel::new(vec![1.0, 3.0]).unwrap();
        let f = |z: &[f64]| (z[0] - 0.3 * z[1] * z[1]).sin() + 1.5;
        let x = [0.8, -0.4];
        let a = m.mehler_apply(0.25, &x, 40, f).unwrap();
        let b = m.density_apply(0.25, &x, 40, f).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn change_of_measure_has_unit_mass() {
        let m = SpectralModel::new(vec![1.0, 5.0, 9.0]).unwrap();
        let v = m.density_apply(0.2, &[1.0, -0.5, 0.25], 30, |_| 1.0).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn semigroup_property() {
        // P_s (P_t f) = P_{s+t} f.
        let m = SpectralModel::new(vec![1.0]).unwrap();
        let f = |z: &[f64]| (0.9 * z[0]).cos() + 0.3 * z[0];
        let (s, t) = (0.15, 0.35);
        let outer = m
            .mehler_apply(s, &[0.6], 40, |y| m.mehler_apply(t, y, 40, f).unwrap())
            .unwrap();
        let direct = m.mehler_apply(s + t, &[0.6], 40, f).unwrap();
        assert_relative_eq!(outer, direct, max_relative = 1e-12);
    }

    #[test]
    fn contraction_in_sup_norm() {
        let m = SpectralModel::new(vec![0.5, 2.0]).unwrap();
        let f = |z: &[f64]| (z[0] * z[1]).tanh();
        for &t in &[0.05, 0.5, 2.0] {
            let v = m.mehler_apply(t, &[1.0, 1.0], 30, f).unwrap();
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn gradient_bound_discrete_slack_is_nonnegative() {
        let m = SpectralModel::new(vec![1.0, 4.0]).unwrap();
        // Lipschitz-but-kinked test function: nothing differentiable needed.
        let f = |z: &[f64]| (z[0].abs() + 0.5 * z[1]).min(2.0);
        let g = m
            .gradient_bound_check(0.3, &[0.4, -0.9], &[1.0, 2.0], 40, f)
            .unwrap();
        assert!(g.derivative.abs() <= g.discrete_bound * (1.0 + 1e-14));
        // Discrete and model bounds agree to quadrature accuracy.
        assert_relative_eq!(g.discrete_bound, g.model_bound, max_relative = 1e-8);
    }

    #[test]
    fn gradient_matches_direct_difference() {
        let m = SpectralModel::new(vec![1.0, 2.5]).unwrap();
        let f = |z: &[f64]| (z[0] + 0.7 * z[1]).sin();
        let (t, x, u) = (0.4, [0.3, 0.2], [0.6, -1.0]);
        let g = m.gradient_bound_check(t, &x, &u, 40, f).unwrap();
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(u.iter()).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(u.iter()).map(|(a, b)| a - h * b).collect();
        let fd = (m.mehler_apply(t, &xp, 40, f).unwrap() - m.mehler_apply(t, &xm, 40, f).unwrap())
            / (2.0 * h);
        assert_relative_eq!(g.derivative, fd, max_relative = 1e-6);
    }

    #[test]
    fn budget_and_domain_are_enforced() {
        let m = SpectralModel::power_law(8, 2.0).unwrap();
        assert!(matches!(
            m.mehler_apply(0.1, &[0.0; 8], 64, |_| 1.0),
            Err(Error::Capacity(_))
        ));
        assert!(m.mehler_apply(0.0, &[0.0; 8], 4, |_| 1.0).is_err());
        assert!(SpectralModel::power_law(4, 1.0).is_err());
        assert!(SpectralModel::new(vec![1.0, -2.0]).is_err());
        assert!(m.mehler_apply(0.1, &[0.0; 3], 4, |_| 1.0).is_err());
    }

    #[test]
    fn power_law_rates() {
        let m = SpectralModel::power_law(4, 2.0).unwrap();
        assert_eq!(m.rates, vec![1.0, 4.0, 9.0, 16.0]);
        let tr = m.trace_qt(1e9).unwrap();
        // At large t the trace saturates at sum 1/(2 n^p).
        let exact: f64 = (1..=4).map(|n| 0.5 / ((n * n) as f64)).sum();
        assert_relative_eq!(tr, exact, max_relative = 1e-12);
    }
}
