//! Per-coordinate exit-time diagnostic: thresholds d_n summing to the
//! radius gap, the maximal-inequality tail bound with its constant fitted on
//! coordinate 1, and empirical exceedance probabilities for the first rows.

use crate::runner::{cell, cell_opt, Check, RunArtifacts};
use harnack_lab::coupling::{exit_time_bound, ExitSimConfig};
use harnack_lab::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExitBoundsCliConfig {
    /// Rate exponent p in a_n = n^p; needs (p-1)/2 > 1 + delta
    #[arg(long, default_value_t = 6.0)]
    pub p: f64,
    /// Time horizon of the exceedance events
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Outer exit radius
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Inner radius whose gap the thresholds split
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Threshold decay exponent margin
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Rows in the table
    #[arg(long, default_value_t = 10)]
    pub n_table: usize,
    /// Coordinates summed for the bound total
    #[arg(long, default_value_t = 10_000)]
    pub n_sum: usize,
    /// Simulation trials per empirical row
    #[arg(long, default_value_t = 800)]
    pub trials: u64,
    /// Rate-1 simulation step
    #[arg(long, default_value_t = 1e-2)]
    pub du: f64,
    /// Longest simulated rate-1 horizon
    #[arg(long, default_value_t = 1000.0)]
    pub u_cap: f64,
    /// Largest analytic leak allowed when a horizon is truncated
    ///
    #[arg(long, default_value_t = 1e-9)]
    pub leak_tol: f64,
    /// Rows 1..=n_empirical get a simulated column
    #[arg(long, default_value_t = 4)]
    pub n_empirical: usize,
    /// Simulation seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Largest acceptable bound tail beyond n_sum, relative
    #[arg(long, default_value_t = 0.05)]
    pub tail_tol: f64,
}

impl Default for ExitBoundsCliConfig {
    fn default() -> Self {
        ExitBoundsCliConfig {
            p: 6.0,
            t0: 1.0,
            r: 2.0,
            q: 1.0,
            delta: 0.5,
            n_table: 10,
            n_sum: 10_000,
            trials: 800,
            du: 1e-2,
            u_cap: 1000.0,
            leak_tol: 1e-9,
            n_empirical: 4,
            seed: 7,
            tail_tol: 0.05,
        }
    }
}

pub fn run(cfg: &ExitBoundsCliConfig) -> Result<RunArtifacts> {
    let sim = ExitSimConfig {
        trials: cfg.trials,
        du: cfg.du,
        u_cap: cfg.u_cap,
        leak_tol: cfg.leak_tol,
        n_empirical: cfg.n_empirical,
        seed: cfg.seed,
    };
    let report = exit_time_bound(
        cfg.p, cfg.t0, cfg.r, cfg.q, cfg.delta, cfg.n_table, cfg.n_sum, &sim,
    )?;

    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.n.to_string(),
                cell(row.rate),
                cell(row.d_n),
                cell(row.bound),
                cell_opt(row.empirical),
                cell_opt(row.empirical_se),
                row.horizon_truncated.to_string(),
                cell(row.truncation_leak),
            ]
        })
        .collect();

    let mut worst_excess = f64::NEG_INFINITY;
    let mut simulated = 0usize;
    let mut within = true;
    for row in &report.rows {
        if let (Some(e), Some(se)) = (row.empirical, row.empirical_se) {
            simulated += 1;
            let excess = e - (row.bound + 3.0 * se);
            worst_excess = worst_excess.max(excess);
            if excess > 0.0 {
                within = false;
            }
        }
    }

    let checks = vec![
        Check::new(
            "empirical-within-bound",
            within && simulated > 0,
            format!(
                "{simulated} simulated rows; worst (empirical - bound - 3se) = {worst_excess:.3e}"
            ),
        ),
        Check::new(
            "threshold-normalization",
            report.normalization_residual <= 1e-12,
            format!(
                "|C^2 zeta(1+2 delta) - 1| = {:.3e}",
                report.normalization_residual
            ),
        ),
        Check::new(
            "bound-summable",
            report.tail_ratio <= cfg.tail_tol,
            format!(
                "partial sum {:.4e} over n <= {}, estimated tail ratio {:.3e}",
                report.bound_partial_sum, report.n_sum, report.tail_ratio
            ),
        ),
    ];

    let mut summary = serde_json::to_value(&report).expect("report serializes");
    if let serde_json::Value::Object(map) = &mut summary {
        map.remove("rows");
    }

    Ok(RunArtifacts {
        experiment: "exit-bounds",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns: [
            "n",
            "rate",
            "d_n",
            "bound",
            "empirical",
            "empirical_se",
            "horizon_truncated",
            "truncation_leak",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        csv_rows,
        summary,
        checks,
    })
}
