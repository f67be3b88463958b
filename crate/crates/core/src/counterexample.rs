//! Green functions whose two-point ratios grow without bound in the dimension.
//!
//! For Brownian motion, the Newtonian Green function gives two-point ratios
//! that depend only on the geometry: G(x, z) / G(0, z) = (|x-z| / |z|)^{2-n},
//! the constant (4/3)^{n-2} for the probe pair x = e_n, z = 4 e_n. For the
//! anisotropic model with rates a_j = j^p the analogous quantity is built from
//! the time-integrated transition density with one coordinate killed on an
//! interval,
//!
//! ```text
//! h_n(x, z) = int_0^inf  q~(t, x_1, z_1) prod_{j>=2} p_{a_j}(t, x_j, z_j) dt,
//! ```
//!
//! and the same probe pair makes the ratio h_n(e_n, 4 e_n) / h_n(0, 4 e_n)
//! blow up: the last coordinate relaxes on the time scale 1/a_n, where the
//! Gaussian cost of reaching 4 from 1 beats the cost from 0 by a factor
//! e^{eps a_n} that no polynomial prefactor can absorb. The envelope helpers
//! quantify exactly that factor; the Monte Carlo occupation estimator provides
//! an independent route to h at reachable probe points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::killed::KilledCoordinate;
use crate::quadrature::integrate_piecewise;
use crate::spectral::SpectralModel;

/// Gamma(two_x / 2) for positive half-integer arguments.
fn gamma_half_integer(two_x: usize) -> f64 {
    assert!(two_x >= 1);
    if two_x.is_multiple_of(2) {
        // Gamma(m) = (m-1)!
        (1..two_x / 2).map(|k| k as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), then the recurrence Gamma(x+1) = x Gamma(x).
        let mut g = std::f64::consts::PI.sqrt();
        let mut k = 1usize;
        while k < two_x {
            g *= k as f64 / 2.0;
            k += 2;
        }
        g
    }
}

/// Newtonian Green function of Brownian motion (unit diffusion, generator
/// half-Laplacian) in dimension n >= 3:
/// G(x, z) = Gamma(n/2 - 1) / (2 pi^{n/2}) * |x - z|^{2-n}.
pub fn newtonian_green(x: &[f64], z: &[f64]) -> Result<f64> {
    let n = x.len();
    if z.len() != n {
        return Err(Error::dimension("points have different dimensions"));
    }
    if n < 3 {
        return Err(Error::domain(format!(
            "transient Green function needs dimension >= 3, got {n}"
        )));
    }
    let r2: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    if r2 == 0.0 {
        return Err(Error::Pole("Green function evaluated at its pole".into()));
    }
    let c = gamma_half_integer(n - 2) / (2.0 * std::f64::consts::PI.powf(n as f64 / 2.0));
    Ok(c * r2.sqrt().powf(2.0 - n as f64))
}

/// Two routes to the Brownian probe-pair ratio G(e_n, 4 e_n) / G(0, 4 e_n):
/// the Green-function quotient and the closed form (4/3)^{n-2}.
pub fn bm_probe_ratio(n: usize) -> Result<(f64, f64)> {
    let mut e = vec![0.0; n];
    e[n - 1] = 1.0;
    let mut z = vec![0.0; n];
    z[n - 1] = 4.0;
    let quotient = newtonian_green(&e, &z)? / newtonian_green(&vec![0.0; n], &z)?;
    let closed = (4.0f64 / 3.0).powi(n as i32 - 2);
    Ok((quotient, closed))
}

/// Product transition density of independent coordinates with the given rates:
/// prod_j N(z_j ; e^{-a_j t} x_j, q_t(a_j)).
pub fn product_density(rates: &[f64], t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != rates.len() || z.len() != rates.len() {
        return Err(Error::dimension(format!(
            "rates/point dimensions disagree: {} rates, x has {}, z has {}",
            rates.len(),
            x.len(),
            z.len()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    if rates.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::domain("rates must be positive"));
    }
    let mut v = 1.0;
    for ((&a, &xi), &zi) in rates.iter().zip(x.iter()).zip(z.iter()) {
        v *= SpectralModel::transition_density_1d(a, t, xi, zi);
    }
    Ok(v)
}

/// The anisotropic model behind the ratio pipeline: coordinate 1 is the killed
/// drifted motion, coordinates 2..=n are independent with the given rates.
pub struct KilledProductModel {
    pub killed: KilledCoordinate,
    pub free_rates: Vec<f64>,
}

/// A time-integrated density value with its accounting.
#[derive(Debug, Clone, Copy)]
pub struct GreenValue {
    pub value: f64,
    /// Quadrature error estimate (absolute).
    pub quad_error: f64,
    /// Analytic tail added beyond the truncation horizon.
    pub tail: f64,
    /// Truncation horizon used.
    pub t_max: f64,
}

impl KilledProductModel {
    pub fn new(
        kill_rate: f64,
        half_width: f64,
        grid: usize,
        modes: usize,
        free_rates: Vec<f64>,
    ) -> Result<Self> {
        if free_rates.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::domain("free rates must be positive and finite"));
        }
        Ok(KilledProductModel {
            killed: KilledCoordinate::new(kill_rate, half_width, grid, modes)?,
            free_rates,
        })
    }

    pub fn dim(&self) -> usize {
        1 + self.free_rates.len()
    }

    /// Transition density of the product process at time t.
    pub fn density(&self, t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n || z.len() != n {
            return Err(Error::dimension(format!(
                "model dimension {n}, got points of dimension {} and {}",
                x.len(),
                z.len()
            )));
        }
        let mut v = self.killed.density(t, x[0], z[0])?;
        for (j, &a) in self.free_rates.iter().enumerate() {
            v *= SpectralModel::transition_density_1d(a, t, x[j + 1], z[j + 1]);
        }
        Ok(v)
    }

    /// h(x, z) = integral of the density over all time, by adaptive quadrature
    /// split at each coordinate's relaxation time, truncated at 10 mean
    /// lifetimes of the killed coordinate with the analytic exponential tail
    /// added back.
    pub fn green(&self, x: &[f64], z: &[f64], rel_tol: f64) -> Result<GreenValue> {
        let beta1 = self.killed.beta1();
        let t_max = 10.0 / beta1;
        let mut pts: Vec<f64> = vec![0.0, t_max];
        for &a in self
            .free_rates
            .iter()
            .chain(std::iter::once(&self.killed.rate))
        {
            if a > 0.0 {
                let tc = 1.0 / a;
                if tc > 1e-6 && tc < t_max * 0.999 {
                    pts.push(tc);
                }
            }
        }
        pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        pts.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
        let mut bad: Option<Error> = None;
        let f = |t: f64| -> Result<f64> {
            if t <= 0.0 {
                return Ok(0.0);
            }
            self.density(t, x, z)
        };
        let mut g = |t: f64| match f(t) {
            Ok(v) => v,
            Err(e) => {
                bad = Some(e);
                0.0
            }
        };
        let r = integrate_piecewise(&mut g, &pts, rel_tol)?;
        if let Some(e) = bad {
            return Err(e);
        }
        let tail = self.density(t_max, x, z)? / beta1;
        Ok(GreenValue {
            value: r.value + tail,
            quad_error: r.error,
            tail,
            t_max,
        })
    }

    /// h averaged over a centered box around z (tensor Simpson, 5 points per
    /// coordinate): the quantity a box-counting Monte Carlo estimator sees.
    pub fn green_box_average(
        &self,
        x: &[f64],
        z: &[f64],
        box_half: f64,
        rel_tol: f64,
    ) -> Result<f64> {
        let n = self.dim();
        if !(box_half > 0.0) {
            return Err(Error::domain("box half-width must be positive"));
        }
        let offsets = [-box_half, -0.5 * box_half, 0.0, 0.5 * box_half, box_half];
        let weights = [1.0 / 12.0, 4.0 / 12.0, 2.0 / 12.0, 4.0 / 12.0, 1.0 / 12.0];
        let mut idx = vec![0usize; n];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            let mut zz = z.to_vec();
            for (c, &i) in idx.iter().enumerate() {
                w *= weights[i];
                zz[c] += offsets[i];
            }
            acc += w * self.green(x, &zz, rel_tol)?.value;
            // advance the mixed-radix counter
            let mut c = 0;
            loop {
                if c == n {
                    return Ok(acc);
                }
                idx[c] += 1;
                if idx[c] < 5 {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
        }
    }
}

/// One row of the ratio pipeline.
#[derive(Debug, Clone, Copy)]
pub struct GreenRatioRow {
    pub n: usize,
    /// Rate of the probe coordinate, a_n = n^p.
    pub rate: f64,
    /// h(e_n, 4 e_n).
    pub h_source: f64,
    /// h(0, 4 e_n).
    pub h_origin: f64,
    pub ratio: f64,
    /// Combined quadrature error estimate for the two integrals (absolute,
    /// normalized by the respective values).
    pub rel_error: f64,
    /// Principal eigenvalue of the killed coordinate used in truncation.
    pub beta1: f64,
}

/// Configuration of the ratio pipeline.
#[derive(Debug, Clone)]
pub struct GreenRatioConfig {
    /// Rate exponent: a_j = j^p. Must exceed 1.
    pub p: f64,
    /// Probe dimensions 1..=n_max.
    pub n_max: usize,
    /// Killed-coordinate grid points.
    pub grid: usize,
    /// Killed-coordinate modes.
    pub modes: usize,
    /// Relative quadrature tolerance per integral.
    pub rel_tol: f64,
}

impl Default for GreenRatioConfig {
    fn default() -> Self {
        GreenRatioConfig {
            p: 2.0,
            n_max: 4,
            grid: 2000,
            modes: 100,
            rel_tol: 1e-9,
        }
    }
}

/// Run the pipeline: for each n, h_n(e_n, 4 e_n) / h_n(0, 4 e_n) with
/// a_j = j^p and the first coordinate killed on (-6, 6) with unit drift.
pub fn green_ratio_pipeline(cfg: &GreenRatioConfig) -> Result<Vec<GreenRatioRow>> {
    if !(cfg.p > 1.0) {
        return Err(Error::domain(format!(
            "rate exponent must exceed 1, got {}",
            cfg.p
        )));
    }
    if cfg.n_max == 0 {
        return Err(Error::domain("need at least one probe dimension"));
    }
    let a_top = (cfg.n_max as f64).powf(cfg.p);
    if 16.0 * a_top > 600.0 {
        return Err(Error::Numerical(format!(
            "Gaussian cost 16 a_n = {:.1} at n = {} underflows f64; reduce n or p",
            16.0 * a_top,
            cfg.n_max
        )));
    }
    let mut rows = Vec::with_capacity(cfg.n_max);
    for n in 1..=cfg.n_max {
        let free_rates: Vec<f64> = (2..=n).map(|j| (j as f64).powf(cfg.p)).collect();
        let model = KilledProductModel::new(1.0, 6.0, cfg.grid, cfg.modes, free_rates)?;
        let mut src = vec![0.0; n];
        src[n - 1] = 1.0;
        let mut pole = vec![0.0; n];
        pole[n - 1] = 4.0;
        let origin = vec![0.0; n];
        let hs = model.green(&src, &pole, cfg.rel_tol)?;
        let ho = model.green(&origin, &pole, cfg.rel_tol)?;
        if !(ho.value > 0.0) {
            return Err(Error::Numerical(format!(
                "origin Green value vanished at n = {n}"
            )));
        }
        rows.push(GreenRatioRow {
            n,
            rate: (n as f64).powf(cfg.p),
            h_source: hs.value,
            h_origin: ho.value,
            ratio: hs.value / ho.value,
            rel_error: hs.quad_error / hs.value.abs().max(f64::MIN_POSITIVE)
                + ho.quad_error / ho.value.abs().max(f64::MIN_POSITIVE),
            beta1: model.killed.beta1(),
        });
    }
    Ok(rows)
}

/// Minimum over v in [e^-2, e^-1] of g(v) = 16 - (4 - v)^2 / (1 - v^2),
/// scanned on an even grid. Returns (minimum, argmin). The value is the
/// exponential margin by which the source beats the origin per unit rate.
pub fn exponential_margin(points: usize) -> (f64, f64) {
    let lo = (-2.0f64).exp();
    let hi = (-1.0f64).exp();
    let mut best = f64::INFINITY;
    let mut arg = lo;
    for k in 0..points {
        let v = lo + (hi - lo) * (k as f64) / (points as f64 - 1.0);
        let g = 16.0 - (4.0 - v) * (4.0 - v) / (1.0 - v * v);
        if g < best {
            best = g;
            arg = v;
        }
    }
    (best, arg)
}

/// Envelope ratio e^{eps a} / a: the guaranteed growth of the two-point
/// ratio at rate a, up to dimension-independent constants.
pub fn envelope_ratio(eps: f64, a: f64) -> f64 {
    (eps * a).exp() / a
}

/// Monte Carlo occupation estimator settings.
#[derive(Debug, Clone)]
pub struct OccupationConfig {
    pub trials: u64,
    pub dt: f64,
    /// Half-width of the counting box around z.
    pub box_half: f64,
    /// Path horizon; paths surviving this long are truncated (the neglected
    /// mass is e^{-beta_1 horizon} relative).
    pub horizon: f64,
    pub seed: u64,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Estimate h(x, z) as expected occupation time of the box around z divided
/// by its volume. Coordinate 1 steps by its exact Gaussian marginal with a
/// Brownian-bridge absorption correction at both walls; the other coordinates
/// step by their exact one-step transitions. Trials are independent
/// counter-mode streams, so the estimate is reproducible and order-free.
pub fn mc_occupation(
    model: &KilledProductModel,
    x: &[f64],
    z: &[f64],
    cfg: &OccupationConfig,
) -> Result<McEstimate> {
    let n = model.dim();
    if x.len() != n || z.len() != n {
        return Err(Error::dimension("point dimension mismatch"));
    }
    if !(cfg.dt > 0.0) || !(cfg.box_half > 0.0) || !(cfg.horizon > cfg.dt) {
        return Err(Error::Config("bad occupation settings".into()));
    }
    if cfg.trials < 2 {
        return Err(Error::Config("need at least two trials".into()));
    }
    let r = model.killed.half_width;
    let drift = model.killed.rate;
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let sqrt_dt = cfg.dt.sqrt();
    // Exact one-step coefficients for the free coordinates.
    let decay: Vec<f64> = model.free_rates.iter().map(|a| (-a * cfg.dt).exp()).collect();
    let sds: Vec<f64> = model
        .free_rates
        .iter()
        .map(|&a| SpectralModel::qt_eigenvalue(a, cfg.dt).sqrt())
        .collect();
    let occupations: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial);
            let mut state = x.to_vec();
            let mut occ = 0.0f64;
            for _ in 0..steps {
                // Killed coordinate: exact drifted Gaussian step.
                let x0 = state[0];
                let x1 = x0 - drift * cfg.dt + sqrt_dt * standard_normal(&mut rng);
                if x1.abs() >= r {
                    break;
                }
                // Absorption during the step: Brownian-bridge wall crossings
                // (constant drift does not change the bridge law).
                let p_up = (-2.0 * (r - x0) * (r - x1) / cfg.dt).exp();
                let p_dn = (-2.0 * (x0 + r) * (x1 + r) / cfg.dt).exp();
                if rng.gen::<f64>() < p_up + p_dn - p_up * p_dn {
                    break;
                }
                state[0] = x1;
                for j in 0..n - 1 {
                    state[j + 1] =
                        decay[j] * state[j + 1] + sds[j] * standard_normal(&mut rng);
                }
                let inside = state
                    .iter()
                    .zip(z.iter())
                    .all(|(s, c)| (s - c).abs() <= cfg.box_half);
                if inside {
                    occ += cfg.dt;
                }
            }
            occ
        })
        .collect();
    let volume = (2.0 * cfg.box_half).powi(n as i32);
    let m = occupations.iter().sum::<f64>() / cfg.trials as f64;
    let var = occupations
        .iter()
        .map(|o| (o - m) * (o - m))
        .sum::<f64>()
        / (cfg.trials as f64 - 1.0);
    Ok(McEstimate {
        value: m / volume,
        std_error: (var / cfg.trials as f64).sqrt() / volume,
        trials: cfg.trials,
    })
}

/// Standard normal via Box-Muller (two uniforms per call keeps the stream
/// layout independent of rejection counts).
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
