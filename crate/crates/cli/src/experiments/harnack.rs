//! Parabolic Harnack comparison in one dimension: log u(t1, x) - log u(t2, y)
//! against T_x^2/(4(t2-t1)) + (1/2) log(t2/t1), where T_x is the flow time
//! from y to x along the field. Pairs come from an explicit list or a seeded
//! random sweep over reachable configurations.

use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::distance::parabolic_harnack_check;
use harnack_lab::field::{ExprField, ScalarField, VectorFieldSet};
use harnack_lab::heat::solve_heat_grid;
use harnack_lab::{Error, GridConfig, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnackCliConfig {
    /// Field expression (one field, one dimension)
    #[arg(long, default_value = "2 + sin(x)")]
    pub field: String,
    /// Initial datum expression; must be positive
    #[arg(long, default_value = "exp(-x*x/2)")]
    pub datum: String,
    /// Domain lower edge
    #[arg(long, default_value_t = -26.0)]
    pub lo: f64,
    /// Domain upper edge
    #[arg(long, default_value_t = 26.0)]
    pub hi: f64,
    /// Grid nodes
    #[arg(long, default_value_t = 2601)]
    pub nodes: usize,
    /// Core-window lower edge for the boundary certificate
    #[arg(long, default_value_t = -5.0)]
    pub core_lo: f64,
    /// Core-window upper edge
    #[arg(long, default_value_t = 5.0)]
    pub core_hi: f64,
    /// Fraction of the explicit stability limit used for the step
    ///
    #[arg(long, default_value_t = 0.8)]
    pub cfl: f64,
    /// Explicit pairs "t1;t2;x;y", one flag per pair (overrides the sweep)
    #[arg(long = "pair", value_name = "T1;T2;X;Y")]
    pub pairs: Vec<String>,
    /// Random pairs drawn when none are given
    #[arg(long, default_value_t = 50)]
    pub sweep_count: usize,
    /// Sweep seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Sweep draws y uniformly from [y_lo, y_hi)
    #[arg(long, default_value_t = -2.5)]
    pub y_lo: f64,
    /// Upper edge of the y draw
    #[arg(long, default_value_t = 2.0)]
    pub y_hi: f64,
    /// Sweep sets x = y + U[0, dx_max)
    #[arg(long, default_value_t = 1.5)]
    pub dx_max: f64,
    /// Snapshot times the sweep draws (t1, t2) from, ascending
    ///
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Flow-integration tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub ode_tol: f64,
    /// Comparison tolerance on lhs <= rhs
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Allow t2 > 1 (the comparison is stated for t2 <= 1)
    #[arg(long, default_value_t = false)]
    pub allow_late: bool,
    /// Largest acceptable boundary influence on the core window
    ///
    #[arg(long, default_value_t = 1e-6)]
    pub boundary_tol: f64,
}

impl Default for HarnackCliConfig {
    fn default() -> Self {
        HarnackCliConfig {
            field: "2 + sin(x)".to_string(),
            datum: "exp(-x*x/2)".to_string(),
            lo: -26.0,
            hi: 26.0,
            nodes: 2601,
            core_lo: -5.0,
            core_hi: 5.0,
            cfl: 0.8,
            pairs: Vec::new(),
            sweep_count: 50,
            seed: 7,
            y_lo: -2.5,
            y_hi: 2.0,
            dx_max: 1.5,
            times: vec![0.1, 0.25, 0.4, 0.5, 0.75, 1.0],
            ode_tol: 1e-8,
            tolerance: 1e-9,
            allow_late: false,
            boundary_tol: 1e-6,
        }
    }
}

struct Pair {
    t1: f64,
    t2: f64,
    x: f64,
    y: f64,
}

fn parse_pairs(specs: &[String]) -> Result<Vec<Pair>> {
    specs
        .iter()
        .map(|s| {
            let parts: std::result::Result<Vec<f64>, _> =
                s.split(';').map(|c| c.trim().parse::<f64>()).collect();
            let parts = parts.map_err(|e| Error::Config(format!("bad pair {s:?}: {e}")))?;
            if parts.len() != 4 {
                return Err(Error::Config(format!(
                    "pair {s:?} needs exactly t1;t2;x;y"
                )));
            }
            Ok(Pair {
                t1: parts[0],
                t2: parts[1],
                x: parts[2],
                y: parts[3],
            })
        })
        .collect()
}

fn sweep_pairs(cfg: &HarnackCliConfig) -> Result<Vec<Pair>> {
    if cfg.times.len() < 2 {
        return Err(Error::Config(
            "the sweep needs at least two snapshot times".into(),
        ));
    }
    if !(cfg.y_hi > cfg.y_lo) || !(cfg.dx_max > 0.0) {
        return Err(Error::Config("sweep ranges must have positive extent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.sweep_count);
    for _ in 0..cfg.sweep_count {
        let y = rng.gen_range(cfg.y_lo..cfg.y_hi);
        let x = y + rng.gen_range(0.0..cfg.dx_max);
        let i = rng.gen_range(0..cfg.times.len());
        let j = loop {
            let j = rng.gen_range(0..cfg.times.len());
            if j != i {
                break j;
            }
        };
        let (t1, t2) = (
            cfg.times[i.min(j)],
            cfg.times[i.max(j)],
        );
        out.push(Pair { t1, t2, x, y });
    }
    Ok(out)
}

pub fn run(cfg: &HarnackCliConfig) -> Result<RunArtifacts> {
    // Flag parsing cannot default a repeated list, so an absent --times
    // falls back to the documented default schedule here.
    let mut cfg = cfg.clone();
    if cfg.times.is_empty() {
        cfg.times = HarnackCliConfig::default().times;
    }
    let cfg = &cfg;
    let field: Arc<dyn ScalarField> = Arc::new(ExprField::new(&cfg.field, 1)?);
    let fields = VectorFieldSet::from_fields(1, vec![field])?;
    let datum = ExprField::new(&cfg.datum, 1)?;

    let pairs = if cfg.pairs.is_empty() {
        sweep_pairs(cfg)?
    } else {
        parse_pairs(&cfg.pairs)?
    };

    // Solve once at every snapshot time any pair touches.
    let mut times: Vec<f64> = pairs.iter().flat_map(|p| [p.t1, p.t2]).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    if times.is_empty() {
        return Err(Error::Config("no pairs to check".into()));
    }

    let mut grid = GridConfig::line(cfg.lo, cfg.hi, cfg.nodes);
    grid.cfl = cfg.cfl;
    grid.core = Some((vec![cfg.core_lo], vec![cfg.core_hi]));
    let solution = solve_heat_grid(&fields, &datum, &times, &grid)?;

    let mut csv_rows = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut all_satisfied = true;
    let mut skipped = 0usize;
    for p in &pairs {
        match parabolic_harnack_check(
            &fields,
            &solution,
            p.t1,
            p.t2,
            &[p.x],
            &[p.y],
            cfg.ode_tol,
            cfg.tolerance,
            cfg.allow_late,
        ) {
            Ok(hc) => {
                min_slack = min_slack.min(hc.slack);
                all_satisfied &= hc.satisfied;
                csv_rows.push(vec![
                    cell(hc.t1),
                    cell(hc.t2),
                    cell(hc.x[0]),
                    cell(hc.y[0]),
                    cell(hc.t_x),
                    cell(hc.lhs),
                    cell(hc.rhs),
                    cell(hc.slack),
                    hc.satisfied.to_string(),
                ]);
            }
            Err(Error::Precondition(why)) => {
                skipped += 1;
                csv_rows.push(vec![
                    cell(p.t1),
                    cell(p.t2),
                    cell(p.x),
                    cell(p.y),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("skipped: {why}"),
                ]);
            }
            Err(e) => return Err(e),
        }
    }
    let admissible = pairs.len() - skipped;

    let checks = vec![
        Check::new(
            "inequality-holds",
            all_satisfied && admissible > 0,
            format!(
                "{admissible} admissible pairs, minimum slack {min_slack:.6e}"
            ),
        ),
        Check::new(
            "pairs-admissible",
            skipped == 0,
            format!("{skipped} of {} pairs skipped as unreachable", pairs.len()),
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
        experiment: "harnack",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns: [
            "t1", "t2", "x", "y", "t_x", "lhs", "rhs", "slack", "satisfied",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        csv_rows,
        summary: serde_json::json!({
            "pairs": pairs.len(),
            "admissible": admissible,
            "min_slack": if admissible > 0 { Some(min_slack) } else { None },
            "boundary_influence": solution.boundary_influence,
            "dt": solution.dt,
            "steps": solution.steps,
            "times": times,
        }),
        checks,
    })
}
