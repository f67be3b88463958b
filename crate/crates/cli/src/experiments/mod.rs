//! One module per experiment. Each exposes a config struct that is both a
//! clap argument group and a strict serde table (so the same parameters work
//! as command-line flags and as a TOML file), plus `run(&config)` producing
//! the artifact bundle.

pub mod bm_ratio;
pub mod coupling;
pub mod distance;
pub mod exit_bounds;
pub mod gamma_verify;
pub mod green_ratio;
pub mod harnack;
pub mod li_yau;

use harnack_lab::field::{ExprField, ScalarField, VectorFieldSet};
use harnack_lab::{Error, Result};
use std::sync::Arc;

/// Parse field rows into a vector-field set. Each row is one field; its
/// `d` components are separated by `;` (for instance `"1; 0.15"` in two
/// dimensions). The dimension is taken from the first row.
pub fn parse_field_rows(rows: &[String]) -> Result<VectorFieldSet> {
    if rows.is_empty() {
        return Err(Error::Config("need at least one field row".into()));
    }
    let split: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| r.split(';').map(str::trim).collect())
        .collect();
    let dim = split[0].len();
    let mut comps: Vec<Arc<dyn ScalarField>> = Vec::with_capacity(rows.len() * dim);
    for (i, row) in split.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Config(format!(
                "field row {i} has {} components, expected {dim}",
                row.len()
            )));
        }
        for comp in row {
            comps.push(Arc::new(ExprField::new(comp, dim)?));
        }
    }
    VectorFieldSet::from_fields(dim, comps)
}

/// Parse probe points, one string per point, coordinates separated by `;`.
pub fn parse_points(points: &[String], dim: usize) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| {
            let coords: std::result::Result<Vec<f64>, _> =
                p.split(';').map(|c| c.trim().parse::<f64>()).collect();
            let coords =
                coords.map_err(|e| Error::Config(format!("bad probe {p:?}: {e}")))?;
            if coords.len() != dim {
                return Err(Error::Config(format!(
                    "probe {p:?} has {} coordinates, expected {dim}",
                    coords.len()
                )));
            }
            Ok(coords)
        })
        .collect()
}
