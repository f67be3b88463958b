//! Carré-du-champ calculus for the sum-of-squares operator
//! L = Σ_k ∇_{A^k}², where ∇_{A^k}f = Σ_i a_i^k ∂_i f over a finite set of
//! positive vector fields A^1..A^m on R^d.
//!
//! Everything is computed two independent ways:
//!
//! * **jets** — nested forward-mode differentiation with third-order
//!   truncated polynomial arithmetic (the default route, exact up to
//!   rounding);
//! * **finite differences** — Richardson-extrapolated central stencils on
//!   black-box evaluations, each with an explicit error estimate.
//!
//! Γ(f, g) agrees with its defining combination ½(L(fg) − fLg − gLf) for any
//! smooth fields — the drift cancels identically. The sum-of-squares form of
//! Γ₂, on the other hand, equals the defining combination
//! ½LΓ(f,f) − Γ(f, Lf) only when the single-field operators commute with the
//! directional derivatives ([L_k, ∇_{A^l}] = 0): that holds for one field
//! (m = 1) with any smooth coefficients, for constant fields in any number,
//! and for scalar multiples of a common field — not for general variable
//! field sets. Randomized checks draw from exactly those classes.
//!
//! Every dual-route value carries a `scale`: the sum of the magnitudes of
//! the terms that were combined, so consistency thresholds are multiples of
//! the achievable precision instead of absolute constants.

use crate::error::{Error, Result};
use crate::fd::{self, FdEstimate};
use crate::field::{ScalarField, VectorFieldSet};
use crate::jet::Jet;

/// A quantity computed by two algebraically equal routes, with the
/// magnitude scale of the terms that were combined.
#[derive(Debug, Clone, Copy)]
pub struct DualValue {
    /// The structural formula (product of gradients, sum of squares).
    pub direct: f64,
    /// The defining combination built from L.
    pub defining: f64,
    /// Sum of magnitudes entering the combination; residuals should be
    /// compared against multiples of `scale * epsilon`.
    pub scale: f64,
}

impl DualValue {
    pub fn residual(&self) -> f64 {
        self.direct - self.defining
    }

    /// |direct - defining| <= tol_mult * eps * scale (+ an absolute floor at
    /// denormal magnitudes).
    pub fn consistent(&self, tol_mult: f64) -> bool {
        self.residual().abs() <= tol_mult * f64::EPSILON * self.scale + 1e-300
    }
}

/// All field jets at a point, with positivity checked (the model assumes
/// every component a_i^k is positive where it is evaluated).
fn field_jets_at(fields: &VectorFieldSet, x: &[f64]) -> Result<Vec<Vec<Jet>>> {
    let mut rows = Vec::with_capacity(fields.count);
    for k in 0..fields.count {
        let row = fields.field_jets(k, x)?;
        for (i, j) in row.iter().enumerate() {
            if !(j.v > 0.0) {
                return Err(Error::domain(format!(
                    "field component ({k}, {i}) is not positive at the evaluation point \
                     (value {})",
                    j.v
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Directional derivative as a jet: ∇_{A^k} g = Σ_i a_i^k ∂_i g, one order
/// below g.
fn dir(field_row: &[Jet], g: &Jet) -> Jet {
    let mut out = Jet::constant(g.dim, 0.0);
    out.order = g.order.saturating_sub(1);
    for (i, a) in field_row.iter().enumerate() {
        out = &out + &(a * &g.partial(i));
    }
    out
}

/// L g = Σ_k ∇_{A^k}(∇_{A^k} g) as a jet, two orders below g.
fn l_jet(rows: &[Vec<Jet>], g: &Jet) -> Jet {
    let mut out = Jet::constant(g.dim, 0.0);
    out.order = g.order.saturating_sub(2);
    for row in rows {
        out = &out + &dir(row, &dir(row, g));
    }
    out
}

/// Γ(g1, g2) = Σ_k (∇_{A^k}g1)(∇_{A^k}g2) as a jet, one order below the
/// lesser argument.
fn gamma_jet(rows: &[Vec<Jet>], g1: &Jet, g2: &Jet) -> Jet {
    let mut out = Jet::constant(g1.dim, 0.0);
    out.order = g1.order.min(g2.order).saturating_sub(1);
    for row in rows {
        out = &out + &(&dir(row, g1) * &dir(row, g2));
    }
    out
}

fn check_point(fields: &VectorFieldSet, x: &[f64]) -> Result<()> {
    if x.len() != fields.dim {
        return Err(Error::dimension(format!(
            "point has dimension {}, fields live on dimension {}",
            x.len(),
            fields.dim
        )));
    }
    Ok(())
}

/// ∇_{A^k} f at x.
pub fn grad_field(
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    k: usize,
    x: &[f64],
) -> Result<f64> {
    check_point(fields, x)?;
    if k >= fields.count {
        return Err(Error::domain(format!(
            "field index {k} out of range (have {})",
            fields.count
        )));
    }
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    Ok(dir(&rows[k], &fj).v)
}

/// L f at x by the expanded formula
/// Σ_k Σ_{ij} a_i^k a_j^k ∂²_{ij} f + Σ_k Σ_{ij} a_j^k (∂_j a_i^k) ∂_i f.
pub fn apply_l(f: &dyn ScalarField, fields: &VectorFieldSet, x: &[f64]) -> Result<f64> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let d = fields.dim;
    let mut total = 0.0;
    for row in &rows {
        for i in 0..d {
            for j in 0..d {
                total += row[i].v * row[j].v * fj.hess(i, j);
                total += row[j].v * row[i].g[j] * fj.g[i];
            }
        }
    }
    Ok(total)
}

/// L f at x by nested directional differentiation (the independent
/// formulation Σ_k ∇_{A^k}(∇_{A^k}f)).
pub fn apply_l_nested(f: &dyn ScalarField, fields: &VectorFieldSet, x: &[f64]) -> Result<f64> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    Ok(l_jet(&rows, &fj).v)
}

/// Γ(f, g) both ways: product of directional gradients, and the defining
/// combination ½(L(fg) − f Lg − g Lf).
pub fn gamma(
    f: &dyn ScalarField,
    g: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<DualValue> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let gj = g.jet(x)?;
    let direct = gamma_jet(&rows, &fj, &gj).v;
    let l_fg = l_jet(&rows, &(&fj * &gj)).v;
    let l_g = l_jet(&rows, &gj).v;
    let l_f = l_jet(&rows, &fj).v;
    let defining = 0.5 * (l_fg - fj.v * l_g - gj.v * l_f);
    let scale = 0.5 * (l_fg.abs() + (fj.v * l_g).abs() + (gj.v * l_f).abs()) + direct.abs();
    Ok(DualValue {
        direct,
        defining,
        scale,
    })
}

/// Γ₂(f) both ways: the sum of squares Σ_{k,l} (∇_{A^k}∇_{A^l}f)² and the
/// defining combination ½ L Γ(f,f) − Γ(f, Lf).
///
/// The two agree only on commuting-structure field sets (see the module
/// docs); on other sets both values are still returned and the residual is
/// meaningful data, not an error.
pub fn gamma2(f: &dyn ScalarField, fields: &VectorFieldSet, x: &[f64]) -> Result<DualValue> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let mut direct = 0.0;
    let mut sq_scale = 0.0;
    for row_k in &rows {
        for row_l in &rows {
            let cross = dir(row_k, &dir(row_l, &fj)).v;
            direct += cross * cross;
            sq_scale += cross * cross;
        }
    }
    let gamma_ff = gamma_jet(&rows, &fj, &fj);
    let l_gamma = l_jet(&rows, &gamma_ff).v;
    let lf = l_jet(&rows, &fj);
    let gamma_f_lf = gamma_jet(&rows, &fj, &lf).v;
    let defining = 0.5 * l_gamma - gamma_f_lf;
    let scale = 0.5 * l_gamma.abs() + gamma_f_lf.abs() + sq_scale;
    Ok(DualValue {
        direct,
        defining,
        scale,
    })
}

/// Result of the curvature-dimension comparison at one point.
#[derive(Debug, Clone, Copy)]
pub struct CdCheck {
    pub gamma2: f64,
    pub l_value: f64,
    /// (1/m) (Lf)².
    pub lower: f64,
    /// gamma2 - lower; nonnegative up to rounding on the achievable scale.
    pub slack: f64,
    pub scale: f64,
}

/// Γ₂(f) ≥ (1/m)(Lf)², the CD(0, m) inequality, evaluated via the
/// sum-of-squares form (which is the form the Cauchy-Schwarz argument
/// bounds).
pub fn cd_inequality_check(
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<CdCheck> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let mut g2 = 0.0;
    for row_k in &rows {
        for row_l in &rows {
            let cross = dir(row_k, &dir(row_l, &fj)).v;
            g2 += cross * cross;
        }
    }
    let l_value = l_jet(&rows, &fj).v;
    let lower = l_value * l_value / fields.count as f64;
    Ok(CdCheck {
        gamma2: g2,
        l_value,
        lower,
        slack: g2 - lower,
        scale: g2.abs() + lower.abs(),
    })
}

/// |[L_k, ∇_{A^l}] f| at x, where L_k = ∇_{A^k}² is the single-field part of
/// L. Zero for k = l with any smooth field, and for all pairs when the
/// fields are constant or scalar multiples of each other.
pub fn commutator_check(
    k: usize,
    l: usize,
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<f64> {
    check_point(fields, x)?;
    if k >= fields.count || l >= fields.count {
        return Err(Error::domain(format!(
            "field indices ({k}, {l}) out of range (have {})",
            fields.count
        )));
    }
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let lk = |g: &Jet| dir(&rows[k], &dir(&rows[k], g));
    let first = lk(&dir(&rows[l], &fj)).v;
    let second = dir(&rows[l], &lk(&fj)).v;
    Ok((first - second).abs())
}

/// A scalar reparametrization Ψ with derivatives to order 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    Identity,
    Square,
    Exp,
    Log,
}

impl Psi {
    /// (Ψ, Ψ′, Ψ″, Ψ‴) at u.
    pub fn derivs(&self, u: f64) -> Result<[f64; 4]> {
        match self {
            Psi::Identity => Ok([u, 1.0, 0.0, 0.0]),
            Psi::Square => Ok([u * u, 2.0 * u, 2.0, 0.0]),
            Psi::Exp => {
                let e = u.exp();
                Ok([e, e, e, e])
            }
            Psi::Log => {
                if !(u > 0.0) {
                    return Err(Error::domain(format!(
                        "logarithmic reparametrization needs a positive value, got {u}"
                    )));
                }
                let r = 1.0 / u;
                Ok([u.ln(), r, -r * r, 2.0 * r * r * r])
            }
        }
    }
}

/// One identity's two sides.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl IdentityCheck {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn within(&self, rel: f64) -> bool {
        self.residual().abs() <= rel * (self.scale + 1.0)
    }
}

/// The chain-rule identities for a reparametrization Ψ at one point.
#[derive(Debug, Clone, Copy)]
pub struct ChainRuleReport {
    /// L Ψ(f) = Ψ′(f) Lf + Ψ″(f) Γ(f, f).
    pub l_psi: IdentityCheck,
    /// Γ(Ψ(f), g) = Ψ′(f) Γ(f, g).
    pub gamma_psi: IdentityCheck,
    /// Γ₂(Ψ(f)) = Ψ″² Γ(f,f)² + Ψ′² Γ₂(f) + Ψ′ Ψ″ Γ(f, Γ(f,f)),
    /// with Γ₂ taken in its defining form (valid for any smooth fields).
    pub gamma2_psi: IdentityCheck,
    /// The specialization Γ₂(log f) = Γ(f,f)²/f⁴ − Γ(f, Γ(f,f))/f³ + Γ₂(f)/f²,
    /// evaluated whenever f(x) > 0.
    pub gamma2_log: Option<IdentityCheck>,
}

/// Evaluate all chain-rule identities for Ψ at x. Γ₂ appears in its defining
/// form, so the identities hold for any smooth positive fields, not only the
/// commuting-structure classes.
pub fn chain_rule_checks(
    f: &dyn ScalarField,
    psi: Psi,
    g: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<ChainRuleReport> {
    check_point(fields, x)?;
    let rows = field_jets_at(fields, x)?;
    let fj = f.jet(x)?;
    let gj = g.jet(x)?;
    let [_, p1, p2, _] = psi.derivs(fj.v)?;
    let psi_f = {
        let [q0, q1, q2, q3] = psi.derivs(fj.v)?;
        fj.chain(q0, q1, q2, q3)
    };

    // Defining-form Γ₂ of an order-3 jet.
    let gamma2_def = |h: &Jet| -> (f64, f64) {
        let gh = gamma_jet(&rows, h, h);
        let l_gh = l_jet(&rows, &gh).v;
        let lh = l_jet(&rows, h);
        let g_h_lh = gamma_jet(&rows, h, &lh).v;
        (
            0.5 * l_gh - g_h_lh,
            0.5 * l_gh.abs() + g_h_lh.abs(),
        )
    };

    // L Ψ(f) = Ψ′ Lf + Ψ″ Γ(f,f).
    let l_psi_lhs = l_jet(&rows, &psi_f).v;
    let lf = l_jet(&rows, &fj);
    let gamma_ff = gamma_jet(&rows, &fj, &fj);
    let l_psi_rhs = p1 * lf.v + p2 * gamma_ff.v;
    let l_psi = IdentityCheck {
        lhs: l_psi_lhs,
        rhs: l_psi_rhs,
        scale: l_psi_lhs.abs() + (p1 * lf.v).abs() + (p2 * gamma_ff.v).abs(),
    };

    // Γ(Ψ(f), g) = Ψ′ Γ(f, g).
    let gp_lhs = gamma_jet(&rows, &psi_f, &gj).v;
    let gfg = gamma_jet(&rows, &fj, &gj).v;
    let gamma_psi = IdentityCheck {
        lhs: gp_lhs,
        rhs: p1 * gfg,
        scale: gp_lhs.abs() + (p1 * gfg).abs(),
    };

    // Γ₂(Ψ(f)) = Ψ″² Γ² + Ψ′² Γ₂(f) + Ψ′ Ψ″ Γ(f, Γ(f,f)).
    let (g2_psi_lhs, s_lhs) = gamma2_def(&psi_f);
    let (g2_f, s_f) = gamma2_def(&fj);
    let g_f_gff = gamma_jet(&rows, &fj, &gamma_ff).v;
    let t1 = p2 * p2 * gamma_ff.v * gamma_ff.v;
    let t2 = p1 * p1 * g2_f;
    let t3 = p1 * p2 * g_f_gff;
    let gamma2_psi = IdentityCheck {
        lhs: g2_psi_lhs,
        rhs: t1 + t2 + t3,
        scale: s_lhs + t1.abs() + p1 * p1 * s_f + t3.abs(),
    };

    // Γ₂(log f) in the explicit display, when f(x) > 0.
    let gamma2_log = if fj.v > 0.0 {
        let log_f = fj.ln();
        let (lhs, s1) = gamma2_def(&log_f);
        let v = fj.v;
        let u1 = gamma_ff.v * gamma_ff.v / (v * v * v * v);
        let u2 = g_f_gff / (v * v * v);
        let u3 = g2_f / (v * v);
        Some(IdentityCheck {
            lhs,
            rhs: u1 - u2 + u3,
            scale: s1 + u1.abs() + u2.abs() + s_f / (v * v),
        })
    } else if psi == Psi::Log {
        return Err(Error::domain(format!(
            "logarithmic chain rule needs f > 0 at the point, got {}",
            fj.v
        )));
    } else {
        None
    };

    Ok(ChainRuleReport {
        l_psi,
        gamma_psi,
        gamma2_psi,
        gamma2_log,
    })
}

// ---------------------------------------------------------------------------
// Finite-difference second route
// ---------------------------------------------------------------------------

/// ∇_{A^k} f at x from central differences of f alone (field values are
/// exact). Independent of the jet derivative bands.
pub fn grad_field_fd(
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    k: usize,
    x: &[f64],
) -> Result<FdEstimate> {
    check_point(fields, x)?;
    let a = fields.field_values(k, x)?;
    let mut value = 0.0;
    let mut error = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        let e = fd::d1(&mut |y| f.value(y), x, i, fd::H1)?;
        value += ai * e.value;
        error += ai.abs() * e.error;
    }
    Ok(FdEstimate { value, error })
}

/// L f at x from central differences (second derivatives of f, first
/// derivatives of the field components).
pub fn apply_l_fd(
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<FdEstimate> {
    check_point(fields, x)?;
    let d = fields.dim;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..fields.count {
        let a = fields.field_values(k, x)?;
        for i in 0..d {
            for j in 0..d {
                let hess = fd::d2(&mut |y| f.value(y), x, i, j, fd::H2)?;
                value += a[i] * a[j] * hess.value;
                error += (a[i] * a[j]).abs() * hess.error;
                let da = fd::d1(&mut |y| fields.component(k, i).value(y), x, j, fd::H1)?;
                let df = fd::d1(&mut |y| f.value(y), x, i, fd::H1)?;
                value += a[j] * da.value * df.value;
                error += a[j].abs()
                    * (da.value.abs() * df.error + df.value.abs() * da.error + da.error * df.error);
            }
        }
    }
    Ok(FdEstimate { value, error })
}

/// Γ(f, g) at x from central differences.
pub fn gamma_fd(
    f: &dyn ScalarField,
    g: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<FdEstimate> {
    check_point(fields, x)?;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..fields.count {
        let df = grad_field_fd(f, fields, k, x)?;
        let dg = grad_field_fd(g, fields, k, x)?;
        value += df.value * dg.value;
        error += df.value.abs() * dg.error + dg.value.abs() * df.error + df.error * dg.error;
    }
    Ok(FdEstimate { value, error })
}

/// Γ₂(f) in the sum-of-squares form from nested central differences: the
/// inner directional derivative is itself a finite-difference functional, so
/// its noise is amplified by the outer stencil; the returned error estimate
/// accounts for both.
pub fn gamma2_sos_fd(
    f: &dyn ScalarField,
    fields: &VectorFieldSet,
    x: &[f64],
) -> Result<FdEstimate> {
    check_point(fields, x)?;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..fields.count {
        for l in 0..fields.count {
            let inner_err = std::cell::Cell::new(0.0f64);
            let mut inner = |y: &[f64]| -> Result<f64> {
                let e = grad_field_fd(f, fields, l, y)?;
                inner_err.set(inner_err.get().max(e.error));
                Ok(e.value)
            };
            let a = fields.field_values(k, x)?;
            let mut cross = 0.0;
            let mut cross_err = 0.0;
            for (i, &ai) in a.iter().enumerate() {
                let e = fd::d1(&mut inner, x, i, fd::H2)?;
                cross += ai * e.value;
                // Outer truncation plus inner noise through the Richardson
                // stencil (three one-sided reads at spacing H2/2).
                cross_err += ai.abs() * (e.error + 3.0 * inner_err.get() / fd::H2);
            }
            value += cross * cross;
            error += 2.0 * cross.abs() * cross_err + cross_err * cross_err;
        }
    }
    Ok(FdEstimate { value, error })
}

// ---------------------------------------------------------------------------
// Sampled field norms
// ---------------------------------------------------------------------------

/// Sampled C^{1,1}-style norm of field k over the centered cube of the given
/// half-width: sup (Σ_i a_i²)^{1/2} + sup gradient norm + sup Hessian norm
/// (the last dominates Lipschitz quotients of the gradient on smooth
/// fields). Returns (norm, max sampled gradient Lipschitz quotient); the
/// quotient never exceeds the norm on the same sample when the cache is
/// sound.
pub fn sampled_field_norm(
    fields: &VectorFieldSet,
    k: usize,
    half_width: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand::{Rng, SeedableRng};
    if k >= fields.count {
        return Err(Error::domain("field index out of range"));
    }
    if !(half_width > 0.0) || samples < 2 {
        return Err(Error::Config("need a positive window and at least 2 samples".into()));
    }
    let d = fields.dim;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-half_width..half_width)).collect()
    };
    let mut sup_val: f64 = 0.0;
    let mut sup_grad: f64 = 0.0;
    let mut sup_hess: f64 = 0.0;
    let mut max_quotient: f64 = 0.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..samples {
        let x = draw(&mut rng);
        let jets = fields.field_jets(k, &x)?;
        let val: f64 = jets.iter().map(|j| j.v * j.v).sum::<f64>().sqrt();
        let grad: f64 = jets
            .iter()
            .map(|j| j.g.iter().map(|t| t * t).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let hess: f64 = jets
            .iter()
            .map(|j| j.h.iter().map(|t| t * t).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        sup_val = sup_val.max(val);
        sup_grad = sup_grad.max(grad);
        sup_hess = sup_hess.max(hess);
        let flat: Vec<f64> = jets.iter().flat_map(|j| j.g.iter().copied()).collect();
        if let Some((px, pg)) = prev {
            let dist: f64 = x
                .iter()
                .zip(px.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 1e-9 {
                let dg: f64 = flat
                    .iter()
                    .zip(pg.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                max_quotient = max_quotient.max(dg / dist);
            }
        }
        prev = Some((x, flat));
    }
    // The Hessian sup bounds gradient Lipschitz quotients up to the
    // dimensional constant sqrt(d) for the Euclidean pairing used here.
    Ok((sup_val + sup_grad + (fields.dim as f64).sqrt() * sup_hess, max_quotient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CubicPoly, ExpField, ExprField};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn unit_fields(dim: usize) -> VectorFieldSet {
        VectorFieldSet::constant(dim, &[vec![1.0; dim]]).unwrap()
    }

    /// m = 1 smooth positive field set: components exp(cubic).
    fn random_positive_fields(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> VectorFieldSet {
        let comps: Vec<Arc<dyn ScalarField>> = (0..dim)
            .map(|_| {
                Arc::new(ExpField(CubicPoly::random(dim, 0.4, rng))) as Arc<dyn ScalarField>
            })
            .collect();
        VectorFieldSet::from_fields(dim, comps).unwrap()
    }

    fn random_constant_fields(
        dim: usize,
        m: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> VectorFieldSet {
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.2..2.0)).collect())
            .collect();
        VectorFieldSet::constant(dim, &rows).unwrap()
    }

    #[test]
    fn directional_gradient_hand_values() {
        // d=1, a=1, f=x^2 at 3.
        let f = ExprField::new("x^2", 1).unwrap();
        let fields = unit_fields(1);
        assert_relative_eq!(
            grad_field(&f, &fields, 0, &[3.0]).unwrap(),
            6.0,
            max_relative = 1e-14
        );
        // d=2, a=(1,2), f=x1 x2 at (1,1): 1*1 + 2*1 = 3.
        let f2 = ExprField::new("x*y", 2).unwrap();
        let fields2 = VectorFieldSet::constant(2, &[vec![1.0, 2.0]]).unwrap();
        assert_relative_eq!(
            grad_field(&f2, &fields2, 0, &[1.0, 1.0]).unwrap(),
            3.0,
            max_relative = 1e-14
        );
        // Constant test function: zero.
        let c = ExprField::new("7", 2).unwrap();
        assert_eq!(grad_field(&c, &fields2, 0, &[0.3, -0.4]).unwrap(), 0.0);
        // Index out of range.
        assert!(grad_field(&f, &fields, 1, &[3.0]).is_err());
    }

    #[test]
    fn l_matches_hand_values_and_nested_route() {
        // Constant fields: L(half x^T M x) = sum_k (c^k)^T M c^k.
        let fields = VectorFieldSet::constant(2, &[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = ExprField::new("0.5*(2*x^2 + 2*0.6*x*y + 1.4*y^2)", 2).unwrap();
        // M = [[2, 0.6], [0.6, 1.4]]; c1=(1,1): 2+1.2+1.4=4.6; c2=(1,2):
        // 2 + 2*2*0.6 + 4*1.4 = 10.
        let want = 4.6 + 10.0;
        let x = [0.7, -0.3];
        assert_relative_eq!(apply_l(&f, &fields, &x).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(
            apply_l_nested(&f, &fields, &x).unwrap(),
            want,
            max_relative = 1e-12
        );
        // d=1, m=1, a(x)=1+x^2, f=x at 1: drift a a' = 2*2 = 4.
        let fields1 = VectorFieldSet::from_exprs(1, &[vec!["1 + x^2"]]).unwrap();
        let lin = ExprField::new("x", 1).unwrap();
        assert_relative_eq!(
            apply_l(&lin, &fields1, &[1.0]).unwrap(),
            4.0,
            max_relative = 1e-13
        );
        // The two routes agree on a random smooth case.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let vf = random_positive_fields(2, &mut rng);
        let poly = CubicPoly::random(2, 0.8, &mut rng);
        let a = apply_l(&poly, &vf, &x).unwrap();
        let b = apply_l_nested(&poly, &vf, &x).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-11);
    }

    #[test]
    fn gamma_dual_route_and_hand_value() {
        let fields = unit_fields(2);
        let f = ExprField::new("x", 2).unwrap();
        let g = ExprField::new("y", 2).unwrap();
        let dv = gamma(&f, &g, &fields, &[0.4, 0.9]).unwrap();
        assert_relative_eq!(dv.direct, 1.0, max_relative = 1e-14);
        assert!(dv.consistent(64.0));
        // Constant g: zero.
        let c = ExprField::new("3", 2).unwrap();
        let dz = gamma(&f, &c, &fields, &[0.0, 0.0]).unwrap();
        assert_eq!(dz.direct, 0.0);
        assert!(dz.consistent(64.0));
    }

    #[test]
    fn gamma_is_bilinear_symmetric_nonnegative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for draw in 0..200 {
            let dim = 1 + draw % 3;
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 1.0, &mut rng);
            let g = CubicPoly::random(dim, 1.0, &mut rng);
            let x: Vec<f64> = (0..dim).map(|i| 0.3 * (i as f64) - 0.2).collect();
            let ff = gamma(&f, &f, &fields, &x).unwrap();
            assert!(ff.direct >= 0.0, "draw {draw}: gamma(f,f) = {}", ff.direct);
            let fg = gamma(&f, &g, &fields, &x).unwrap();
            let gf = gamma(&g, &f, &fields, &x).unwrap();
            assert_relative_eq!(fg.direct, gf.direct, max_relative = 1e-12);
            assert!(fg.consistent(512.0), "draw {draw}: residual {}", fg.residual());
        }
    }

    #[test]
    fn gamma_product_rule() {
        // Gamma(f, g h) = g Gamma(f, h) + h Gamma(f, g).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let fields = random_positive_fields(2, &mut rng);
            let f = CubicPoly::random(2, 0.8, &mut rng);
            let g = CubicPoly::random(2, 0.8, &mut rng);
            let h = CubicPoly::random(2, 0.8, &mut rng);
            let x = [0.25, -0.4];
            struct Product<'a>(&'a CubicPoly, &'a CubicPoly);
            impl ScalarField for Product<'_> {
                fn dim(&self) -> usize {
                    self.0.dim
                }
                fn jet(&self, x: &[f64]) -> crate::Result<Jet> {
                    Ok(&self.0.jet(x)? * &self.1.jet(x)?)
                }
            }
            let gh = Product(&g, &h);
            let lhs = gamma(&f, &gh, &fields, &x).unwrap().direct;
            let gv = g.value(&x).unwrap();
            let hv = h.value(&x).unwrap();
            let rhs = gv * gamma(&f, &h, &fields, &x).unwrap().direct
                + hv * gamma(&f, &g, &fields, &x).unwrap().direct;
            let scale = lhs.abs() + rhs.abs() + 1.0;
            assert!(
                (lhs - rhs).abs() <= 1e-11 * scale,
                "product rule residual {}",
                lhs - rhs
            );
        }
    }

    #[test]
    fn gamma2_hand_value_for_constant_fields() {
        // A1=(1,1), A2=(1,2), f = (x^2+y^2)/2: Gamma2 = sum <Ak, Al>^2 = 47.
        let fields = VectorFieldSet::constant(2, &[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = ExprField::new("0.5*(x^2 + y^2)", 2).unwrap();
        let dv = gamma2(&f, &fields, &[0.3, 0.1]).unwrap();
        assert_relative_eq!(dv.direct, 47.0, max_relative = 1e-13);
        assert!(dv.consistent(256.0));
        // Linear f, constant fields: everything vanishes.
        let lin = ExprField::new("2*x - y", 2).unwrap();
        let dz = gamma2(&lin, &fields, &[0.0, 0.0]).unwrap();
        assert_eq!(dz.direct, 0.0);
        assert_eq!(dz.defining, 0.0);
    }

    #[test]
    fn gamma2_dual_route_on_commuting_classes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // m = 1, general smooth positive fields.
        for _ in 0..60 {
            let dim = 1 + (rand::Rng::gen_range(&mut rng, 0..3usize));
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 0.7, &mut rng);
            let x: Vec<f64> = (0..dim).map(|i| 0.1 + 0.2 * i as f64).collect();
            let dv = gamma2(&f, &fields, &x).unwrap();
            assert!(
                dv.consistent(4096.0),
                "m=1 residual {} at scale {}",
                dv.residual(),
                dv.scale
            );
        }
        // m >= 2 constant fields.
        for _ in 0..60 {
            let dim = 2;
            let m = 2 + (rand::Rng::gen_range(&mut rng, 0..2usize));
            let fields = random_constant_fields(dim, m, &mut rng);
            let f = CubicPoly::random(dim, 0.7, &mut rng);
            let dv = gamma2(&f, &fields, &[0.4, -0.2]).unwrap();
            assert!(
                dv.consistent(4096.0),
                "constant-field residual {} at scale {}",
                dv.residual(),
                dv.scale
            );
        }
        // Scalar multiples of a common smooth field.
        let base: Vec<Arc<dyn ScalarField>> = vec![
            Arc::new(ExprField::new("exp(0.3*x + 0.1*y)", 2).unwrap()),
            Arc::new(ExprField::new("1 + 0.5*cos(x - y) + 0.6", 2).unwrap()),
        ];
        let mut comps: Vec<Arc<dyn ScalarField>> = Vec::new();
        for mult in [1.0f64, 2.5] {
            for b in &base {
                let b = b.clone();
                struct Scaled(Arc<dyn ScalarField>, f64);
                impl ScalarField for Scaled {
                    fn dim(&self) -> usize {
                        self.0.dim()
                    }
                    fn jet(&self, x: &[f64]) -> crate::Result<Jet> {
                        Ok(self.0.jet(x)?.scale(self.1))
                    }
                }
                comps.push(Arc::new(Scaled(b, mult)));
            }
        }
        let fields = VectorFieldSet::from_fields(2, comps).unwrap();
        let f = ExprField::new("sin(x) + 0.5*y^2 + 0.2*x*y", 2).unwrap();
        let dv = gamma2(&f, &fields, &[0.5, 0.3]).unwrap();
        assert!(
            dv.consistent(8192.0),
            "scalar-multiple residual {} at scale {}",
            dv.residual(),
            dv.scale
        );
    }

    #[test]
    fn gamma2_equals_l_squared_for_one_field() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let dim = 1 + rand::Rng::gen_range(&mut rng, 0..2usize);
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 0.6, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect();
            let dv = gamma2(&f, &fields, &x).unwrap();
            let lf = apply_l(&f, &fields, &x).unwrap();
            let scale = dv.direct.abs() + lf * lf + 1.0;
            assert!(
                (dv.direct - lf * lf).abs() <= 1e-11 * scale,
                "Gamma2 {} vs (Lf)^2 {}",
                dv.direct,
                lf * lf
            );
        }
    }

    #[test]
    fn cd_inequality_on_valid_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for draw in 0..500 {
            let (fields, dim) = if draw % 2 == 0 {
                let dim = 1 + draw % 3;
                (random_positive_fields(dim, &mut rng), dim)
            } else {
                let m = 2 + draw % 3;
                (random_constant_fields(2, m, &mut rng), 2)
            };
            let f = CubicPoly::random(dim, 1.0, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -0.8..0.8)).collect();
            let cd = cd_inequality_check(&f, &fields, &x).unwrap();
            assert!(
                cd.slack >= -1e-6 * (cd.scale + 1.0),
                "draw {draw}: slack {} at scale {}",
                cd.slack,
                cd.scale
            );
        }
    }

    #[test]
    fn cd_equality_approached_by_near_orthogonal_fields() {
        // Fields (1, eps), (eps, 1) with f = |x|^2/2 give cross-derivatives
        // <Ak, Al>, hence slack = (sum of off-diagonal squares) = exactly
        // 8 eps^2 after the Cauchy-Schwarz floor is subtracted.
        let f = ExprField::new("0.5*(x^2 + y^2)", 2).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.3, 0.1, 0.03, 0.01] {
            let fields =
                VectorFieldSet::constant(2, &[vec![1.0, eps], vec![eps, 1.0]]).unwrap();
            let cd = cd_inequality_check(&f, &fields, &[0.2, 0.6]).unwrap();
            assert_relative_eq!(cd.slack, 8.0 * eps * eps, max_relative = 1e-10);
            assert!(cd.slack < last);
            last = cd.slack;
        }
    }

    #[test]
    fn cd_for_linear_function_is_exactly_zero() {
        let fields = random_constant_fields(2, 2, &mut rand_chacha::ChaCha8Rng::seed_from_u64(19));
        let lin = ExprField::new("x + 2*y", 2).unwrap();
        let cd = cd_inequality_check(&lin, &fields, &[0.1, 0.2]).unwrap();
        assert_eq!(cd.gamma2, 0.0);
        assert_eq!(cd.l_value, 0.0);
        assert_eq!(cd.slack, 0.0);
    }

    #[test]
    fn same_index_commutators_vanish_for_any_smooth_field() {
        // 1-D: a = 1 + x^2 (positive), f = sin: the pinned symbolic example.
        let fields = VectorFieldSet::from_exprs(1, &[vec!["1 + x^2"]]).unwrap();
        let f = ExprField::new("sin(x)", 1).unwrap();
        let c = commutator_check(0, 0, &f, &fields, &[0.7]).unwrap();
        let scale = apply_l(&f, &fields, &[0.7]).unwrap().abs() + 1.0;
        assert!(c <= 1e-10 * scale, "commutator {c}");
        // 100 random smooth draws, m = 1.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for draw in 0..100 {
            let dim = 1 + draw % 3;
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 0.6, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect();
            let c = commutator_check(0, 0, &f, &fields, &x).unwrap();
            let scale = apply_l(&f, &fields, &x).unwrap().abs() + 10.0;
            assert!(c <= 1e-9 * scale, "draw {draw}: commutator {c} (scale {scale})");
        }
    }

    #[test]
    fn cross_commutators_vanish_for_constant_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let fields = random_constant_fields(3, 3, &mut rng);
        let f = CubicPoly::random(3, 0.8, &mut rng);
        for k in 0..3 {
            for l in 0..3 {
                let c = commutator_check(k, l, &f, &fields, &[0.1, -0.2, 0.3]).unwrap();
                assert!(c <= 1e-12, "({k},{l}): {c}");
            }
        }
    }

    #[test]
    fn chain_rules_identity_psi_is_structurally_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let fields = random_positive_fields(2, &mut rng);
        let f = CubicPoly::random(2, 0.7, &mut rng);
        let g = CubicPoly::random(2, 0.7, &mut rng);
        let r = chain_rule_checks(&f, Psi::Identity, &g, &fields, &[0.3, -0.1]).unwrap();
        assert_eq!(r.l_psi.residual(), 0.0);
        assert_eq!(r.gamma_psi.residual(), 0.0);
        assert_eq!(r.gamma2_psi.residual(), 0.0);
    }

    #[test]
    fn chain_rules_hold_on_random_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for draw in 0..60 {
            let dim = 1 + draw % 2;
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 0.5, &mut rng);
            let g = CubicPoly::random(dim, 0.5, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -0.4..0.4)).collect();
            for psi in [Psi::Square, Psi::Exp] {
                let r = chain_rule_checks(&f, psi, &g, &fields, &x).unwrap();
                assert!(r.l_psi.within(1e-9), "draw {draw} {psi:?} L: {}", r.l_psi.residual());
                assert!(
                    r.gamma_psi.within(1e-9),
                    "draw {draw} {psi:?} Gamma: {}",
                    r.gamma_psi.residual()
                );
                assert!(
                    r.gamma2_psi.within(1e-9),
                    "draw {draw} {psi:?} Gamma2: {}",
                    r.gamma2_psi.residual()
                );
            }
        }
    }

    #[test]
    fn log_chain_rule_and_its_domain() {
        let fields = VectorFieldSet::from_exprs(1, &[vec!["1 + 0.2*sin(x) + 0.1"]]).unwrap();
        let f = ExprField::new("2 + sin(x)", 1).unwrap();
        let g = ExprField::new("x", 1).unwrap();
        let r = chain_rule_checks(&f, Psi::Log, &g, &fields, &[0.9]).unwrap();
        assert!(r.l_psi.within(1e-9));
        assert!(r.gamma2_psi.within(1e-9));
        let log_row = r.gamma2_log.expect("f > 0 here");
        assert!(log_row.within(1e-9), "log display residual {}", log_row.residual());
        // And the log case refuses nonpositive values.
        let neg = ExprField::new("x - 5", 1).unwrap();
        assert!(chain_rule_checks(&neg, Psi::Log, &g, &fields, &[0.9]).is_err());
    }

    #[test]
    fn finite_differences_confirm_the_jets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for draw in 0..25 {
            let dim = 1 + draw % 2;
            let fields = random_positive_fields(dim, &mut rng);
            let f = CubicPoly::random(dim, 0.6, &mut rng);
            let g = CubicPoly::random(dim, 0.6, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -0.3..0.3)).collect();
            let jg = grad_field(&f, &fields, 0, &x).unwrap();
            let fg = grad_field_fd(&f, &fields, 0, &x).unwrap();
            assert!(
                (jg - fg.value).abs() <= 10.0 * fg.error.max(1e-12),
                "draw {draw}: grad jet {jg} vs fd {} (err {})",
                fg.value,
                fg.error
            );
            let jl = apply_l(&f, &fields, &x).unwrap();
            let fl = apply_l_fd(&f, &fields, &x).unwrap();
            assert!(
                (jl - fl.value).abs() <= 10.0 * fl.error.max(1e-10),
                "draw {draw}: L jet {jl} vs fd {} (err {})",
                fl.value,
                fl.error
            );
            let jga = gamma(&f, &g, &fields, &x).unwrap().direct;
            let fga = gamma_fd(&f, &g, &fields, &x).unwrap();
            assert!(
                (jga - fga.value).abs() <= 10.0 * fga.error.max(1e-11),
                "draw {draw}: Gamma jet {jga} vs fd {} (err {})",
                fga.value,
                fga.error
            );
            let jg2 = gamma2(&f, &fields, &x).unwrap().direct;
            let fg2 = gamma2_sos_fd(&f, &fields, &x).unwrap();
            assert!(
                (jg2 - fg2.value).abs() <= 10.0 * fg2.error.max(1e-8),
                "draw {draw}: Gamma2 jet {jg2} vs fd {} (err {})",
                fg2.value,
                fg2.error
            );
        }
    }

    #[test]
    fn positivity_is_enforced_at_evaluation() {
        let fields = VectorFieldSet::from_exprs(1, &[vec!["x"]]).unwrap();
        let f = ExprField::new("x^2", 1).unwrap();
        // Positive side works, nonpositive side errors.
        assert!(grad_field(&f, &fields, 0, &[0.5]).is_ok());
        assert!(grad_field(&f, &fields, 0, &[-0.5]).is_err());
        assert!(apply_l(&f, &fields, &[0.0]).is_err());
    }

    #[test]
    fn sampled_norm_dominates_lipschitz_quotients() {
        let fields = VectorFieldSet::from_exprs(2, &[vec!["exp(0.2*x) + 0.1*y^2 + 0.5", "1 + 0.3*sin(x+y) + 0.4"]])
            .unwrap();
        let (norm, quotient) = sampled_field_norm(&fields, 0, 1.5, 400, 51).unwrap();
        assert!(norm > 0.0);
        assert!(
            quotient <= norm,
            "sampled Lipschitz quotient {quotient} exceeds cached norm {norm}"
        );
    }
}
