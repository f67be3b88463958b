//! Probe-pair ratio of the transient Brownian Green function across
//! dimensions: G(e_n, 4 e_n) / G(0, 4 e_n), compared against the closed form
//! (4/3)^{n-2}, with the doubling factor between consecutive dimensions.

use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::counterexample::bm_probe_ratio;
use harnack_lab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BmRatioConfig {
    /// Largest dimension to evaluate (from 3)
    #[arg(long, default_value_t = 64)]
    pub n_max: usize,
    /// Relative tolerance for both agreement checks
    #[arg(long, default_value_t = 1e-12)]
    pub rel_tol: f64,
}

impl Default for BmRatioConfig {
    fn default() -> Self {
        BmRatioConfig {
            n_max: 64,
            rel_tol: 1e-12,
        }
    }
}

pub fn run(cfg: &BmRatioConfig) -> Result<RunArtifacts> {
    if cfg.n_max < 3 {
        return Err(Error::Config(format!(
            "n_max must be at least 3, got {}",
            cfg.n_max
        )));
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(Error::Config("rel_tol must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut max_rel_gap = 0.0f64;
    for n in 3..=cfg.n_max {
        let (quotient, closed) = bm_probe_ratio(n)?;
        let rel_gap = (quotient - closed).abs() / closed;
        max_rel_gap = max_rel_gap.max(rel_gap);
        ratios.push(quotient);
        rows.push(vec![
            n.to_string(),
            cell(quotient),
            cell(closed),
            cell(rel_gap),
        ]);
    }
    let mut max_doubling_err = 0.0f64;
    for w in ratios.windows(2) {
        max_doubling_err = max_doubling_err.max((w[1] / w[0] - 4.0 / 3.0).abs() / (4.0 / 3.0));
    }

    let checks = vec![
        Check::new(
            "closed-form-agreement",
            max_rel_gap <= cfg.rel_tol,
            format!("max relative gap to (4/3)^(n-2) is {max_rel_gap:.3e}"),
        ),
        Check::new(
            "doubling-factor",
            max_doubling_err <= cfg.rel_tol,
            format!("consecutive-ratio factor is 4/3 up to {max_doubling_err:.3e}"),
        ),
    ];

    Ok(RunArtifacts {
        experiment: "bm-ratio",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns: ["n", "ratio", "closed_form", "rel_gap"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        csv_rows: rows,
        summary: serde_json::json!({
            "n_max": cfg.n_max,
            "max_rel_gap": max_rel_gap,
            "max_doubling_rel_err": max_doubling_err,
        }),
        checks,
    })
}
