//! Experiment runner. Each subcommand resolves a strict config (flags, or a
//! TOML file through `run --config`), executes the experiment, writes CSV and
//! JSON artifacts whose bytes depend only on the resolved config, prints the
//! per-check verdicts plus wall-clock on stdout, and exits 0 only when every
//! check passed (1: a check failed; 2: invalid config; 3: numerical failure).

// Same guard idiom as the library: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod experiments;
mod runner;

use clap::{Parser, Subcommand};
use harnack_lab::Error;
use runner::RunArtifacts;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "harnack-lab",
    version,
    about = "Numerical experiments on diagonal and degenerate diffusions: \
             Green-ratio growth, coupling probabilities, operator-calculus \
             identities, and Harnack-type comparisons.",
    after_help = "Without a subcommand, prints the experiment table. \
                  Artifacts go to --out, else $HARNACK_LAB_OUT, else ./artifacts."
)]
struct Cli {
    /// Output directory for artifacts (overrides $HARNACK_LAB_OUT;
    /// default ./artifacts)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores; artifact
    /// bytes never depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiments with their roles and key parameters
    List,
    /// Run an experiment described by a TOML file:
    /// experiment = "<name>" plus a [params] table (strict keys)
    Run {
        /// Path to the TOML config file
        #[arg(long)]
        config: PathBuf,
    },
    /// Transient Brownian Green-ratio across dimensions vs the closed form
    BmRatio(experiments::bm_ratio::BmRatioConfig),
    /// Killed-product density ratios for power-law rates, with the
    /// exponential envelope they outgrow
    OuGreenRatio(experiments::green_ratio::GreenRatioCliConfig),
    /// Coupling-probability estimate over independent trials with a Wilson
    /// interval
    Coupling(experiments::coupling::CouplingCliConfig),
    /// Per-coordinate exit-time thresholds, tail bounds, and empirical
    /// exceedance
    ExitBounds(experiments::exit_bounds::ExitBoundsCliConfig),
    /// Randomized verification of the operator-calculus identities
    GammaVerify(experiments::gamma_verify::GammaVerifyCliConfig),
    /// Pointwise lower bound on the generator of the log-solution
    LiYau(experiments::li_yau::LiYauCliConfig),
    /// Parabolic Harnack comparison with flow-time transport cost
    Harnack(experiments::harnack::HarnackCliConfig),
    /// Flow distance between points with witness lower bounds
    Distance(experiments::distance::DistanceCliConfig),
}

const EXPERIMENTS: [(&str, &str); 8] = [
    (
        "bm-ratio",
        "Green-function probe-pair ratio across dimensions; doubling factor 4/3",
    ),
    (
        "ou-green-ratio",
        "time-integrated killed-product density ratios for rates n^p, with envelope",
    ),
    (
        "coupling",
        "probability that all coordinates merge before exit, with 95% interval",
    ),
    (
        "exit-bounds",
        "per-coordinate exit thresholds and maximal-inequality tail bounds",
    ),
    (
        "gamma-verify",
        "dual-route Gamma/Gamma_2, curvature-dimension slack, chain rules",
    ),
    (
        "li-yau",
        "grid solution of the degenerate heat equation; L log u >= -1/(2t) sweep",
    ),
    (
        "harnack",
        "log-solution comparison across times against the flow-time cost",
    ),
    (
        "distance",
        "field-flow distance with event detection and witness lower bounds",
    ),
];

fn print_table() {
    println!("harnack-lab experiments:");
    for (name, blurb) in EXPERIMENTS {
        println!("  {name:<16} {blurb}");
    }
    println!();
    println!("usage: harnack-lab <experiment> [flags]   (see <experiment> --help)");
    println!("       harnack-lab run --config file.toml");
    println!("artifacts: <out>/<experiment>.csv and .json; --out, $HARNACK_LAB_OUT, or ./artifacts");
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest_experiment(name: &str) -> &'static str {
    EXPERIMENTS
        .iter()
        .min_by_key(|(known, _)| levenshtein(name, known))
        .expect("table is nonempty")
        .0
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    experiment: String,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    params: toml::Table,
}

fn params_into<T: serde::de::DeserializeOwned>(params: toml::Table) -> Result<T, String> {
    toml::Value::Table(params)
        .try_into()
        .map_err(|e| format!("bad [params] table: {e}"))
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let Some(command) = cli.command else {
        print_table();
        return 0;
    };

    let started = Instant::now();
    let out_from_env = || std::env::var_os("HARNACK_LAB_OUT").map(PathBuf::from);

    let (file_out, name, config_json, outcome): (
        Option<PathBuf>,
        &'static str,
        serde_json::Value,
        harnack_lab::Result<RunArtifacts>,
    ) = match command {
        Command::List => {
            print_table();
            return 0;
        }
        Command::Run { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return 2;
                }
            };
            let file: RunFile = match toml::from_str(&text) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return 2;
                }
            };
            match dispatch_named(&file.experiment, file.params) {
                Ok((name, json, outcome)) => (file.out, name, json, outcome),
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return 2;
                }
            }
        }
        Command::BmRatio(cfg) => (
            None,
            "bm-ratio",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::bm_ratio::run(&cfg),
        ),
        Command::OuGreenRatio(cfg) => (
            None,
            "ou-green-ratio",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::green_ratio::run(&cfg),
        ),
        Command::Coupling(cfg) => (
            None,
            "coupling",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::coupling::run(&cfg),
        ),
        Command::ExitBounds(cfg) => (
            None,
            "exit-bounds",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::exit_bounds::run(&cfg),
        ),
        Command::GammaVerify(cfg) => (
            None,
            "gamma-verify",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::gamma_verify::run(&cfg),
        ),
        Command::LiYau(cfg) => (
            None,
            "li-yau",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::li_yau::run(&cfg),
        ),
        Command::Harnack(cfg) => (
            None,
            "harnack",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::harnack::run(&cfg),
        ),
        Command::Distance(cfg) => (
            None,
            "distance",
            serde_json::to_value(&cfg).expect("config serializes"),
            experiments::distance::run(&cfg),
        ),
    };

    let out_dir = cli
        .out
        .or(file_out)
        .or_else(out_from_env)
        .unwrap_or_else(|| PathBuf::from("artifacts"));

    finish(name, config_json, outcome, &out_dir, started)
}

type Dispatched = (
    &'static str,
    serde_json::Value,
    harnack_lab::Result<RunArtifacts>,
);

fn dispatch_named(experiment: &str, params: toml::Table) -> Result<Dispatched, String> {
    macro_rules! run_as {
        ($name:literal, $module:ident, $ty:ty) => {{
            let cfg: $ty = params_into(params)?;
            Ok((
                $name,
                serde_json::to_value(&cfg).expect("config serializes"),
                experiments::$module::run(&cfg),
            ))
        }};
    }
    match experiment {
        "bm-ratio" => run_as!("bm-ratio", bm_ratio, experiments::bm_ratio::BmRatioConfig),
        "ou-green-ratio" => run_as!(
            "ou-green-ratio",
            green_ratio,
            experiments::green_ratio::GreenRatioCliConfig
        ),
        "coupling" => run_as!(
            "coupling",
            coupling,
            experiments::coupling::CouplingCliConfig
        ),
        "exit-bounds" => run_as!(
            "exit-bounds",
            exit_bounds,
            experiments::exit_bounds::ExitBoundsCliConfig
        ),
        "gamma-verify" => run_as!(
            "gamma-verify",
            gamma_verify,
            experiments::gamma_verify::GammaVerifyCliConfig
        ),
        "li-yau" => run_as!("li-yau", li_yau, experiments::li_yau::LiYauCliConfig),
        "harnack" => run_as!("harnack", harnack, experiments::harnack::HarnackCliConfig),
        "distance" => run_as!(
            "distance",
            distance,
            experiments::distance::DistanceCliConfig
        ),
        other => Err(format!(
            "unknown experiment {other:?}; did you mean {:?}?",
            nearest_experiment(other)
        )),
    }
}

fn finish(
    name: &'static str,
    config: serde_json::Value,
    outcome: harnack_lab::Result<RunArtifacts>,
    out_dir: &Path,
    started: Instant,
) -> i32 {
    match outcome {
        Ok(artifacts) => {
            let hash = runner::config_hash(artifacts.experiment, &artifacts.config);
            println!("experiment={} config_hash={hash}", artifacts.experiment);
            for c in &artifacts.checks {
                println!(
                    "check {}: {} - {}",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            match runner::write_artifacts(out_dir, &artifacts) {
                Ok((csv, json)) => {
                    println!("artifact {}", csv.display());
                    println!("artifact {}", json.display());
                }
                Err(e) => {
                    eprintln!("error: cannot write artifacts under {}: {e}", out_dir.display());
                    return 3;
                }
            }
            println!("wall_clock_s={:.3}", started.elapsed().as_secs_f64());
            let passed = artifacts.checks.iter().filter(|c| c.pass).count();
            let total = artifacts.checks.len();
            let ok = passed == total;
            println!(
                "result: {} ({passed}/{total} checks)",
                if ok { "PASS" } else { "FAIL" }
            );
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let code = match &e {
                Error::Config(_) | Error::Domain(_) | Error::Dimension(_) => 2,
                _ => 3,
            };
            eprintln!("error: {e}");
            if code == 3 {
                match runner::write_failure_artifact(out_dir, name, &config, &e.to_string()) {
                    Ok(p) => eprintln!("partial artifact {}", p.display()),
                    Err(w) => eprintln!("error: cannot write partial artifact: {w}"),
                }
            }
            eprintln!("wall_clock_s={:.3}", started.elapsed().as_secs_f64());
            code
        }
    }
}
