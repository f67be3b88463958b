//! Gauss-Hermite rules and adaptive Simpson quadrature.
//!
//! The Hermite rule integrates against the weight e^{-x^2}: nodes are the
//! eigenvalues of the Jacobi matrix of the orthonormal Hermite recurrence
//! (diagonal 0, off-diagonal sqrt(k/2)), and the Christoffel weights come from
//! w_i = 1 / sum_{k<n} p_k(x_i)^2 with p_k orthonormal. An order-n rule is
//! exact for polynomials of degree 2n-1.

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;

/// Hard cap on tensor-quadrature work (number of nodes visited).
pub const TENSOR_BUDGET: usize = 20_000_000;

/// Gauss-Hermite rule for weight e^{-x^2} on the real line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Build an order-n rule. Supported up to order 128.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 128 {
            return Err(Error::domain(format!(
                "Gauss-Hermite order {order} outside 1..=128"
            )));
        }
        let diag = vec![0.0f64; order];
        let off: Vec<f64> = (1..order).map(|k| ((k as f64) / 2.0).sqrt()).collect();
        let jacobi = SymTridiag::new(diag, off)?;
        let mut nodes = jacobi.smallest_eigenvalues(order)?;
        // Enforce the exact +/- symmetry of the spectrum.
        let n = order;
        for i in 0..n / 2 {
            let s = 0.5 * (nodes[i] - nodes[n - 1 - i]);
            nodes[i] = s;
            nodes[n - 1 - i] = -s;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let weights: Vec<f64> = nodes.iter().map(|&x| christoffel_weight(order, x)).collect();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of f against e^{-x^2} dx.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Expectation of g under N(mean, var): E[g(Z)].
    pub fn gaussian_expectation(&self, mean: f64, var: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let s = (2.0 * var).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * g(mean + s * x))
            .sum::<f64>()
            * inv_sqrt_pi
    }
}

/// 1 / sum_{k=0}^{n-1} p_k(x)^2 with p_k orthonormal Hermite
/// (p_0 = pi^{-1/4}, x p_k = sqrt((k+1)/2) p_{k+1} + sqrt(k/2) p_{k-1}).
fn christoffel_weight(n: usize, x: f64) -> f64 {
    let mut pkm1 = 0.0f64;
    let mut pk = 1.0 / std::f64::consts::PI.powf(0.25);
    let mut sum = pk * pk;
    for k in 0..n - 1 {
        let kf = k as f64;
        let pk1 = (x * pk - (kf / 2.0).sqrt() * pkm1) / (((kf + 1.0) / 2.0).sqrt());
        pkm1 = pk;
        pk = pk1;
        sum += pk * pk;
    }
    1.0 / sum
}

/// Iterator over tensor-product multi-indices, used by the Mehler quadrature.
/// Walks {0..order}^dim in lexicographic order.
pub struct MultiIndex {
    idx: Vec<usize>,
    order: usize,
    done: bool,
}

impl MultiIndex {
    pub fn new(dim: usize, order: usize) -> Self {
        MultiIndex {
            idx: vec![0; dim],
            order,
            done: dim == 0,
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let mut i = self.idx.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.idx[i] += 1;
            if self.idx[i] < self.order {
                break;
            }
            self.idx[i] = 0;
        }
        Some(out)
    }
}

/// Result of an adaptive quadrature: value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> QuadResult {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3usize;
    let (value, error) = simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut evals);
    QuadResult { value, error, evals }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    evals: &mut usize,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson: S2 + (S2 - S1)/15 has one order higher accuracy.
        (left + right + delta / 15.0, delta.abs() / 15.0)
    } else {
        let (lv, le) = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals);
        let (rv, re) = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals);
        (lv + rv, le + re)
    }
}

/// Adaptive quadrature over a piecewise partition.
///
/// `points` is a sorted list of breakpoints; a coarse composite pass sets the
/// per-segment tolerance so the total relative error is about `rel_tol`.
pub fn integrate_piecewise(
    f: &mut impl FnMut(f64) -> f64,
    points: &[f64],
    rel_tol: f64,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::domain("need at least two breakpoints"));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("breakpoints must be strictly increasing"));
    }
    // Coarse pass: 9-point composite Simpson per segment for scale only.
    let mut coarse = 0.0f64;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / 8.0;
        let mut s = f(a) + f(b);
        for j in 1..8 {
            let c = if j % 2 == 1 { 4.0 } else { 2.0 };
            s += c * f(a + h * (j as f64));
        }
        coarse += s * h / 3.0;
    }
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    let seg_tol = rel_tol * scale / (points.len() - 1) as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0usize;
    for w in points.windows(2) {
        let r = adaptive_simpson(f, w[0], w[1], seg_tol, 48);
        value += r.value;
        error += r.error;
        evals += r.evals;
    }
    Ok(QuadResult { value, error, evals })
}
