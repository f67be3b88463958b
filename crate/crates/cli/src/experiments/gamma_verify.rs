//! Randomized verification of the operator calculus: both computational
//! routes to Gamma and Gamma_2, the curvature-dimension slack, commutators on
//! the classes where they vanish, and the reparametrization chain rules.

use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::field::{CubicPoly, ExpField, ScalarField, VectorFieldSet};
use harnack_lab::gamma::{
    cd_inequality_check, chain_rule_checks, commutator_check, gamma, gamma2,
};
use harnack_lab::{Error, Psi, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaVerifyCliConfig {
    /// Random draws per field count
    #[arg(long, default_value_t = 500)]
    pub draws: usize,
    /// Field counts verified: 1..=m (count 1 draws one smooth field,
    /// counts >= 2 draw constant fields)
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Ambient dimension
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Seed; draws use per-draw streams
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Dual-route agreement tolerance, in units of machine epsilon times the
    /// term scale
    #[arg(long, default_value_t = 8192.0)]
    pub dual_tol_mult: f64,
    /// Curvature-dimension slack floor, relative to the term scale
    ///
    #[arg(long, default_value_t = 1e-6)]
    pub cd_tol: f64,
    /// Chain-rule relative tolerance
    #[arg(long, default_value_t = 1e-9)]
    pub chain_rel: f64,
    /// Draws (per field count) that also evaluate commutators
    ///
    #[arg(long, default_value_t = 100)]
    pub commutator_draws: usize,
    /// Absolute commutator tolerance on the vanishing classes
    #[arg(long, default_value_t = 1e-9)]
    pub commutator_tol: f64,
}

impl Default for GammaVerifyCliConfig {
    fn default() -> Self {
        GammaVerifyCliConfig {
            draws: 500,
            m: 3,
            d: 3,
            seed: 11,
            dual_tol_mult: 8192.0,
            cd_tol: 1e-6,
            chain_rel: 1e-9,
            commutator_draws: 100,
            commutator_tol: 1e-9,
        }
    }
}

fn draw_fields(
    m_val: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<VectorFieldSet> {
    if m_val == 1 {
        let comps: Vec<Arc<dyn ScalarField>> = (0..d)
            .map(|_| Arc::new(ExpField(CubicPoly::random(d, 0.4, rng))) as Arc<dyn ScalarField>)
            .collect();
        VectorFieldSet::from_fields(d, comps)
    } else {
        let rows: Vec<Vec<f64>> = (0..m_val)
            .map(|_| (0..d).map(|_| rng.gen_range(0.2..2.0)).collect())
            .collect();
        VectorFieldSet::constant(d, &rows)
    }
}

pub fn run(cfg: &GammaVerifyCliConfig) -> Result<RunArtifacts> {
    if cfg.draws == 0 || cfg.m == 0 || cfg.d == 0 {
        return Err(Error::Config(
            "draws, m, and d must all be positive".into(),
        ));
    }
    let mut csv_rows = Vec::new();
    let mut per_m = Vec::new();
    let mut all_gamma_ok = true;
    let mut all_gamma2_ok = true;
    let mut min_cd_slack_rel = f64::INFINITY;
    let mut max_chain_rel = 0.0f64;
    let mut max_commutator = 0.0f64;

    for m_val in 1..=cfg.m {
        let mut m_gamma_eps = 0.0f64;
        let mut m_gamma2_eps = 0.0f64;
        let mut m_cd_min = f64::INFINITY;
        let mut m_chain = 0.0f64;
        let mut m_comm = 0.0f64;
        for draw in 0..cfg.draws {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((m_val as u64) << 32) | draw as u64);
            let fields = draw_fields(m_val, cfg.d, &mut rng)?;
            let f = CubicPoly::random(cfg.d, 1.0, &mut rng);
            let g = CubicPoly::random(cfg.d, 1.0, &mut rng);
            let x: Vec<f64> = (0..cfg.d).map(|_| rng.gen_range(-0.7..0.7)).collect();

            let gv = gamma(&f, &g, &fields, &x)?;
            let g2 = gamma2(&f, &fields, &x)?;
            let cd = cd_inequality_check(&f, &fields, &x)?;
            all_gamma_ok &= gv.consistent(cfg.dual_tol_mult);
            all_gamma2_ok &= g2.consistent(cfg.dual_tol_mult);
            let gamma_eps = gv.residual().abs() / (f64::EPSILON * gv.scale + 1e-300);
            let gamma2_eps = g2.residual().abs() / (f64::EPSILON * g2.scale + 1e-300);
            let cd_rel = cd.slack / (cd.scale + 1.0);
            min_cd_slack_rel = min_cd_slack_rel.min(cd_rel);
            m_gamma_eps = m_gamma_eps.max(gamma_eps);
            m_gamma2_eps = m_gamma2_eps.max(gamma2_eps);
            m_cd_min = m_cd_min.min(cd_rel);

            let mut chain_rel = 0.0f64;
            for psi in [Psi::Square, Psi::Exp] {
                let rep = chain_rule_checks(&f, psi, &g, &fields, &x)?;
                for idc in [rep.l_psi, rep.gamma_psi, rep.gamma2_psi]
                    .into_iter()
                    .chain(rep.gamma2_log)
                {
                    chain_rel = chain_rel.max(idc.residual().abs() / (idc.scale + 1.0));
                }
            }
            max_chain_rel = max_chain_rel.max(chain_rel);
            m_chain = m_chain.max(chain_rel);

            let commutator = if draw < cfg.commutator_draws {
                let mut worst = 0.0f64;
                if m_val == 1 {
                    worst = commutator_check(0, 0, &f, &fields, &x)?;
                } else {
                    for k in 0..m_val {
                        for l in 0..m_val {
                            if k != l {
                                worst = worst.max(commutator_check(k, l, &f, &fields, &x)?);
                            }
                        }
                    }
                }
                max_commutator = max_commutator.max(worst);
                m_comm = m_comm.max(worst);
                Some(worst)
            } else {
                None
            };

            csv_rows.push(vec![
                m_val.to_string(),
                draw.to_string(),
                cell(gv.residual()),
                cell(gv.scale),
                cell(g2.residual()),
                cell(g2.scale),
                cell(cd.slack),
                cell(cd.scale),
                cell(chain_rel),
                commutator.map(cell).unwrap_or_default(),
            ]);
        }
        per_m.push(serde_json::json!({
            "m": m_val,
            "max_gamma_residual_eps": m_gamma_eps,
            "max_gamma2_residual_eps": m_gamma2_eps,
            "min_cd_slack_rel": m_cd_min,
            "max_chain_rel": m_chain,
            "max_commutator": m_comm,
        }));
    }

    let checks = vec![
        Check::new(
            "gamma-dual-routes",
            all_gamma_ok,
            format!(
                "product-of-gradients route matches the defining combination \
                 within {} eps across all draws",
                cfg.dual_tol_mult
            ),
        ),
        Check::new(
            "gamma2-dual-routes",
            all_gamma2_ok,
            format!(
                "sum-of-squares route matches the defining combination within \
                 {} eps on the commuting classes",
                cfg.dual_tol_mult
            ),
        ),
        Check::new(
            "cd-slack-nonnegative",
            min_cd_slack_rel >= -cfg.cd_tol,
            format!("minimum scaled slack {min_cd_slack_rel:.3e}"),
        ),
        Check::new(
            "chain-rules",
            max_chain_rel <= cfg.chain_rel,
            format!("worst relative chain-rule residual {max_chain_rel:.3e}"),
        ),
        Check::new(
            "commutators-vanish",
            max_commutator <= cfg.commutator_tol,
            format!("worst commutator on the vanishing classes {max_commutator:.3e}"),
        ),
    ];

    Ok(RunArtifacts {
        experiment: "gamma-verify",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns: [
            "m",
            "draw",
            "gamma_residual",
            "gamma_scale",
            "gamma2_residual",
            "gamma2_scale",
            "cd_slack",
            "cd_scale",
            "chain_max_rel",
            "commutator_max",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        csv_rows,
        summary: serde_json::json!({
            "per_m": per_m,
            "min_cd_slack_rel": min_cd_slack_rel,
            "max_chain_rel": max_chain_rel,
            "max_commutator": max_commutator,
        }),
        checks,
    })
}
