//! Flow distance between two points: integrate the field flow from x with
//! event detection at y, then cross-check the time with gradient-bounded
//! witness functions that can only underestimate it.

use crate::experiments::parse_field_rows;
use crate::runner::{cell, Check, RunArtifacts};
use harnack_lab::distance::{arc_distance, intrinsic_distance_lower_bound};
use harnack_lab::{ArcOutcome, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceCliConfig {
    /// Field components separated by ';' (a single field)
    #[arg(long, default_value = "1 + x*x")]
    pub field: String,
    /// Start point
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<f64>,
    /// Target point
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    /// Flow-integration tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub ode_tol: f64,
    /// Longest flow time explored
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    /// Witness directions tried for the lower bound
    #[arg(long, default_value_t = 8)]
    pub witnesses: usize,
    /// Agreement tolerance between the canonical witness and the flow time
    ///
    #[arg(long, default_value_t = 1e-4)]
    pub canonical_tol: f64,
}

impl Default for DistanceCliConfig {
    fn default() -> Self {
        DistanceCliConfig {
            field: "1 + x*x".to_string(),
            x: vec![0.0],
            y: vec![1.0],
            ode_tol: 1e-8,
            t_max: 50.0,
            witnesses: 8,
            canonical_tol: 1e-4,
        }
    }
}

pub fn run(cfg: &DistanceCliConfig) -> Result<RunArtifacts> {
    let mut resolved = cfg.clone();
    if resolved.x.is_empty() {
        resolved.x = vec![0.0];
    }
    if resolved.y.is_empty() {
        resolved.y = vec![1.0];
    }
    let cfg = &resolved;

    let fields = parse_field_rows(std::slice::from_ref(&cfg.field))?;
    let dim = fields.dim;
    if cfg.x.len() != dim || cfg.y.len() != dim {
        return Err(Error::Config(format!(
            "points must have the field dimension {dim}, got {} and {}",
            cfg.x.len(),
            cfg.y.len()
        )));
    }

    let arc = arc_distance(&fields, &cfg.x, &cfg.y, cfg.ode_tol, cfg.t_max)?;
    let witness =
        intrinsic_distance_lower_bound(&fields, &cfg.x, &cfg.y, cfg.witnesses, cfg.ode_tol, cfg.t_max)?;

    let flow_time = match arc.outcome {
        ArcOutcome::Reached { t } => Some(t),
        _ => None,
    };

    let mut csv_columns = vec!["t".to_string()];
    csv_columns.extend((0..dim).map(|i| format!("x{i}")));
    let csv_rows: Vec<Vec<String>> = arc
        .path
        .times
        .iter()
        .zip(arc.path.points.iter())
        .map(|(t, p)| {
            let mut row = vec![cell(*t)];
            row.extend(p.iter().map(|&v| cell(v)));
            row
        })
        .collect();

    let determinate = !matches!(arc.outcome, ArcOutcome::Indeterminate { .. });
    let witness_sound = match flow_time {
        Some(t) => witness.value <= t + 1e-9 * (1.0 + t),
        None => true,
    };
    let canonical_close = match (flow_time, witness.canonical) {
        (Some(t), Some(c)) => (c - t).abs() <= cfg.canonical_tol * (1.0 + t),
        _ => true,
    };

    let checks = vec![
        Check::new(
            "outcome-determinate",
            determinate,
            format!("{:?}", arc.outcome),
        ),
        Check::new(
            "witness-below-flow-time",
            witness_sound,
            match flow_time {
                Some(t) => format!(
                    "best witness {:.9} vs flow time {t:.9}",
                    witness.value
                ),
                None => "no finite flow time; nothing to compare".to_string(),
            },
        ),
        Check::new(
            "canonical-matches-flow-time",
            canonical_close,
            match (flow_time, witness.canonical) {
                (Some(t), Some(c)) => {
                    format!("canonical witness {c:.9} vs flow time {t:.9}")
                }
                _ => "canonical witness undefined here".to_string(),
            },
        ),
    ];

    Ok(RunArtifacts {
        experiment: "distance",
        config: serde_json::to_value(cfg).expect("config serializes"),
        csv_columns,
        csv_rows,
        summary: serde_json::json!({
            "outcome": serde_json::to_value(&arc.outcome).expect("outcome serializes"),
            "flow_time": flow_time,
            "witness": serde_json::to_value(&witness).expect("witness serializes"),
            "path_points": arc.path.times.len(),
        }),
        checks,
    })
}
