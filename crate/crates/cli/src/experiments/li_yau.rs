//! Pointwise lower bound on the generator of the log-solution: solve the
//! degenerate heat equation on a padded grid from a positive datum, then
//! verify L log u >= -1/(2t) at every probe that clears the positivity
//! floor.

use crate::experiments::{parse_field_rows, parse_points};
use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::field::ExprField;
use harnack_lab::heat::{li_yau_sweep, solve_heat_grid};
use harnack_lab::{Error, GridConfig, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiYauCliConfig {
    /// Field rows; one flag per field, components separated by ';'
    ///
    #[arg(long = "field", value_name = "EXPR")]
    pub fields: Vec<String>,
    /// Initial datum expression; must be positive
    #[arg(long, default_value = "exp(-x*x/2)")]
    pub datum: String,
    /// Evaluation time
    #[arg(long, default_value_t = 0.25)]
    pub t: f64,
    /// Domain lower edge, every axis
    #[arg(long, default_value_t = -26.0)]
    pub lo: f64,
    /// Domain upper edge, every axis
    #[arg(long, default_value_t = 26.0)]
    pub hi: f64,
    /// Grid nodes per axis
    #[arg(long, default_value_t = 2601)]
    pub nodes: usize,
    /// Core-window lower edge for the boundary certificate
    #[arg(long, default_value_t = -4.0)]
    pub core_lo: f64,
    /// Core-window upper edge
    #[arg(long, default_value_t = 4.0)]
    pub core_hi: f64,
    /// Fraction of the explicit stability limit used for the step
    ///
    #[arg(long, default_value_t = 0.8)]
    pub cfl: f64,
    /// Explicit probes; one flag per point, coordinates separated by ';'
    /// (overrides the generated ones)
    #[arg(long = "probe", value_name = "POINT")]
    pub probes: Vec<String>,
    /// Generated probes per axis when none are given
    #[arg(long, default_value_t = 13)]
    pub probe_count: usize,
    /// Generated probes cover [-probe_span, probe_span]
    #[arg(long, default_value_t = 3.0)]
    pub probe_span: f64,
    /// Margin floor: the bound holds when margin >= -margin_tol
    ///
    #[arg(long, default_value_t = 1e-6)]
    pub margin_tol: f64,
    /// Largest acceptable boundary influence on the core window
    ///
    #[arg(long, default_value_t = 1e-6)]
    pub boundary_tol: f64,
}

impl Default for LiYauCliConfig {
    fn default() -> Self {
        LiYauCliConfig {
            fields: vec!["2 + sin(x)".to_string()],
            datum: "exp(-x*x/2)".to_string(),
            t: 0.25,
            lo: -26.0,
            hi: 26.0,
            nodes: 2601,
            core_lo: -4.0,
            core_hi: 4.0,
            cfl: 0.8,
            probes: Vec::new(),
            probe_count: 13,
            probe_span: 3.0,
            margin_tol: 1e-6,
            boundary_tol: 1e-6,
        }
    }
}

/// Evenly spaced probe lattice: `count` points per axis on
/// [-span, span]^dim.
pub fn probe_lattice(count: usize, span: f64, dim: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if count == 1 {
        vec![0.0]
    } else {
        (0..count)
            .map(|i| -span + 2.0 * span * i as f64 / (count as f64 - 1.0))
            .collect()
    };
    match dim {
        1 => axis.iter().map(|&v| vec![v]).collect(),
        _ => {
            let mut out = Vec::with_capacity(axis.len() * axis.len());
            for &a in &axis {
                for &b in &axis {
                    out.push(vec![a, b]);
                }
            }
            out
        }
    }
}

pub fn grid_config(cfg: &LiYauCliConfig, dim: usize) -> Result<GridConfig> {
    let mut grid = match dim {
        1 => GridConfig::line(cfg.lo, cfg.hi, cfg.nodes),
        2 => GridConfig::square(cfg.lo, cfg.hi, cfg.nodes),
        d => {
            return Err(Error::Config(format!(
                "the grid scheme supports dimensions 1 and 2, got {d}"
            )))
        }
    };
    grid.cfl = cfg.cfl;
    grid.core = Some((vec![cfg.core_lo; dim], vec![cfg.core_hi; dim]));
    Ok(grid)
}

pub fn run(cfg: &LiYauCliConfig) -> Result<RunArtifacts> {
    let mut resolved = cfg.clone();
    if resolved.fields.is_empty() {
        resolved.fields = vec!["2 + sin(x)".to_string()];
    }
    let cfg = &resolved;

    let fields = parse_field_rows(&cfg.fields)?;
    let dim = fields.dim;
    let datum = ExprField::new(&cfg.datum, dim)?;
    let grid = grid_config(cfg, dim)?;
    let probes = if cfg.probes.is_empty() {
        if cfg.probe_count == 0 {
            return Err(Error::Config("probe_count must be positive".into()));
        }
        probe_lattice(cfg.probe_count, cfg.probe_span, dim)
    } else {
        parse_points(&cfg.probes, dim)?
    };

    let solution = solve_heat_grid(&fields, &datum, &[cfg.t], &grid)?;
    let sweep = li_yau_sweep(&fields, &solution, cfg.t, &probes)?;

    let mut csv_columns: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    csv_columns.extend(
        ["log_generator", "bound", "margin"]
            .iter()
            .map(|s| s.to_string()),
    );
    let csv_rows: Vec<Vec<String>> = sweep
        .checks
        .iter()
        .map(|c| {
            let mut row: Vec<String> = c.x.iter().map(|&v| cell(v)).collect();
            row.push(cell(c.value));
            row.push(cell(c.bound));
            row.push(cell(c.margin));
            row
        })
        .collect();

    let checks = vec![
        Check::new(
            "margin-nonnegative",
            sweep.min_margin >= -cfg.margin_tol,
            format!(
                "minimum margin {:.6e} over {} evaluated probes",
                sweep.min_margin,
                sweep.checks.len()
            ),
        ),
        Check::new(
            "boundary-influence",
            solution.boundary_influence <= cfg.boundary_tol,
            format!(
                "core-window boundary influence {:.3e}",
                solution.boundary_influence
            ),
        ),
    ];

    Ok(RunArtifacts {
        experiment: "li-yau",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns,
        csv_rows,
        summary: serde_json::json!({
            "t": cfg.t,
            "dt": solution.dt,
            "steps": solution.steps,
            "min_margin": sweep.min_margin,
            "boundary_influence": solution.boundary_influence,
            "min_over_run": solution.min_over_run,
            "probes_evaluated": sweep.checks.len(),
            "excluded_probes": sweep.excluded,
        }),
        checks,
    })
}
