//! Artifact plumbing shared by every experiment: pass/fail checks, CSV and
//! JSON writers with a schema header, and a content hash of the resolved
//! configuration.
//!
//! Byte determinism contract: artifact bytes are a pure function of the
//! resolved configuration (which includes every seed). Wall-clock time is
//! printed on stdout only and never enters an artifact.

use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = "harnack-lab/v1";

/// One named pass/fail verdict with a human-readable detail line.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
        Check {
            name,
            pass,
            detail: detail.into(),
        }
    }
}

/// Everything an experiment produces: the resolved config echo, tabular rows,
/// a structured summary, and the check verdicts.
#[derive(Debug)]
pub struct RunArtifacts {
    pub experiment: &'static str,
    pub config: serde_json::Value,
    pub csv_columns: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

/// Format a float cell. Plain decimal Display round-trips and is a pure
/// function of the bits, which keeps artifact bytes reproducible.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

pub fn cell_opt(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

/// Content hash of the resolved configuration. serde_json maps are
/// key-sorted, so the serialization is canonical for a given config value.
pub fn config_hash(experiment: &str, config: &serde_json::Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(experiment.as_bytes());
    hasher.update(b"\n");
    hasher.update(config.to_string().as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

fn csv_bytes(a: &RunArtifacts, hash: &str) -> Vec<u8> {
    let mut out = Vec::new();
    let _ = writeln!(out, "# schema={} experiment={}", SCHEMA, a.experiment);
    let _ = writeln!(out, "# config_hash={hash}");
    let _ = writeln!(out, "# config={}", a.config);
    for c in &a.checks {
        let _ = writeln!(
            out,
            "# check {}={}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(out, "{}", a.csv_columns.join(","));
    for row in &a.csv_rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn json_bytes(a: &RunArtifacts, hash: &str) -> Vec<u8> {
    let checks: Vec<serde_json::Value> = a
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "schema": SCHEMA,
        "experiment": a.experiment,
        "config_hash": hash,
        "config": a.config,
        "checks": checks,
        "summary": a.summary,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("artifact document serializes");
    bytes.push(b'\n');
    bytes
}

/// Write `<experiment>.csv` and `<experiment>.json` under `out_dir`,
/// creating the directory when needed. Returns the two paths.
pub fn write_artifacts(out_dir: &Path, a: &RunArtifacts) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let hash = config_hash(a.experiment, &a.config);
    let csv_path = out_dir.join(format!("{}.csv", a.experiment));
    let json_path = out_dir.join(format!("{}.json", a.experiment));
    std::fs::write(&csv_path, csv_bytes(a, &hash))?;
    std::fs::write(&json_path, json_bytes(a, &hash))?;
    Ok((csv_path, json_path))
}

/// Write a minimal JSON artifact describing a failed run, so a numerical
/// failure still leaves a diagnosable trace on disk.
pub fn write_failure_artifact(
    out_dir: &Path,
    experiment: &str,
    config: &serde_json::Value,
    error: &str,
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let doc = serde_json::json!({
        "schema": SCHEMA,
        "experiment": experiment,
        "config_hash": config_hash(experiment, config),
        "config": config,
        "error": error,
    });
    let path = out_dir.join(format!("{experiment}.json"));
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("failure document serializes");
    bytes.push(b'\n');
    std::fs::write(&path, bytes)?;
    Ok(path)
}
