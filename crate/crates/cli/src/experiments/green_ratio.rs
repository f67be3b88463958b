//! Per-dimension ratio of time-integrated killed-product densities,
//! h_n(e_n, 4 e_n) / h_n(0, 4 e_n), for rates a_j = j^p, together with the
//! exponential envelope e^{eps a_n} / a_n that the ratios are expected to
//! outgrow.

use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::counterexample::{
    envelope_ratio, exponential_margin, green_ratio_pipeline, GreenRatioConfig,
};
use harnack_lab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenRatioCliConfig {
    /// Rate exponent p in a_j = j^p; must exceed 1
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Probe dimensions 1..=n_max
    #[arg(long, default_value_t = 4)]
    pub n_max: usize,
    /// Interior grid points of the killed coordinate
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
    /// Spectral modes kept for the killed coordinate
    #[arg(long, default_value_t = 100)]
    pub modes: usize,
    /// Relative quadrature tolerance per time integral
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    /// Grid points for the 1-D envelope-exponent scan
    #[arg(long, default_value_t = 4097)]
    pub scan_points: usize,
    /// Envelope value the top dimension must exceed (checked when n_max >= 4)
    ///
    #[arg(long, default_value_t = 1e3)]
    pub envelope_threshold: f64,
    /// Largest acceptable combined relative quadrature error per row
    ///
    #[arg(long, default_value_t = 1e-6)]
    pub quad_tol: f64,
}

impl Default for GreenRatioCliConfig {
    fn default() -> Self {
        GreenRatioCliConfig {
            p: 2.0,
            n_max: 4,
            grid: 2000,
            modes: 100,
            rel_tol: 1e-9,
            scan_points: 4097,
            envelope_threshold: 1e3,
            quad_tol: 1e-6,
        }
    }
}

pub fn run(cfg: &GreenRatioCliConfig) -> Result<RunArtifacts> {
    if cfg.scan_points < 2 {
        return Err(Error::Config("scan_points must be at least 2".into()));
    }
    let pipeline_cfg = GreenRatioConfig {
        p: cfg.p,
        n_max: cfg.n_max,
        grid: cfg.grid,
        modes: cfg.modes,
        rel_tol: cfg.rel_tol,
    };
    let rows = green_ratio_pipeline(&pipeline_cfg)?;
    let (eps, eps_argmin) = exponential_margin(cfg.scan_points);

    let mut csv_rows = Vec::new();
    let mut envelope = Vec::new();
    for r in &rows {
        let env = envelope_ratio(eps, r.rate);
        envelope.push(serde_json::json!({ "n": r.n, "rate": r.rate, "value": env }));
        csv_rows.push(vec![
            r.n.to_string(),
            cell(cfg.p),
            cell(r.h_origin),
            cell(r.h_source),
            cell(r.ratio),
            cell(r.rel_error),
            cell(r.beta1),
            cfg.modes.to_string(),
        ]);
    }

    let increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let max_quad_err = rows.iter().map(|r| r.rel_error).fold(0.0f64, f64::max);
    let top_envelope = envelope_ratio(eps, rows.last().expect("n_max >= 1").rate);

    let mut checks = vec![
        Check::new(
            "ratios-strictly-increasing",
            increasing || rows.len() < 2,
            if rows.len() < 2 {
                "single row; nothing to compare".to_string()
            } else {
                format!(
                    "ratios: {}",
                    rows.iter()
                        .map(|r| format!("{:.6e}", r.ratio))
                        .collect::<Vec<_>>()
                        .join(" < ")
                )
            },
        ),
        Check::new(
            "quadrature-error",
            max_quad_err <= cfg.quad_tol,
            format!("max combined relative quadrature error {max_quad_err:.3e}"),
        ),
    ];
    if cfg.n_max >= 4 {
        checks.push(Check::new(
            "envelope-threshold",
            top_envelope >= cfg.envelope_threshold,
            format!(
                "envelope e^(eps a_n)/a_n at n={} is {top_envelope:.4e} (eps={eps:.6})",
                cfg.n_max
            ),
        ));
    } else {
        checks.push(Check::new(
            "envelope-threshold",
            true,
            "not applicable below n_max = 4".to_string(),
        ));
    }

    Ok(RunArtifacts {
        experiment: "ou-green-ratio",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns: [
            "n", "p", "h_origin", "h_source", "ratio", "rel_error", "beta1", "modes",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        csv_rows,
        summary: serde_json::json!({
            "p": cfg.p,
            "eps_margin": eps,
            "eps_argmin": eps_argmin,
            "envelope": envelope,
            "ratios": rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
        }),
        checks,
    })
}
