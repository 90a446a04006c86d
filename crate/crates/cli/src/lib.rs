//! Scenario runner: reads a TOML scenario, runs its task and writes
//! `report.json` together with plot-ready CSV files.

pub mod output;
pub mod runner;
pub mod scenario;
pub mod system;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;
use uspas::certcheck::CheckError;
use uspas::compfn::CompFnError;
use uspas::robot::RobotError;
use uspas::synth::SynthError;
use uspas::sysmodel::{IntegrateError, ModelError};

pub use scenario::{load, parse, Scenario, SCHEMA_VERSION};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "USPAS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}", schema_message(path, message))]
    Schema { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("task {0} samples initial states and needs a seed (scenario `seed` or --seed)")]
    MissingSeed(&'static str),
    #[error("cannot build thread pool: {0}")]
    Threads(String),
    #[error(transparent)]
    CompFn(#[from] CompFnError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn schema_message(path: &str, message: &str) -> String {
    if path.is_empty() || path == "." {
        format!("schema error: {message}")
    } else {
        format!("schema error at `{path}`: {message}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Leave timing and host information out of the report.
    pub canonical: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub holds: bool,
    pub out_dir: PathBuf,
    pub report: PathBuf,
}

/// Process exit status for a run: 0 when every asserted property holds,
/// 2 when one was falsified and 1 on execution errors.
pub fn exit_code(result: &Result<RunSummary, CliError>) -> u8 {
    match result {
        Ok(s) if s.holds => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

#[derive(Serialize)]
struct RunInfo {
    started_unix: u64,
    elapsed_seconds: f64,
    threads: usize,
    version: &'static str,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    scenario: &'a str,
    task: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    system: &'a system::SystemInfo,
    holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<serde_json::Value>,
    result: serde_json::Value,
    artifacts: output::Artifacts,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RunInfo>,
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    run_scenario(&load(path)?, opts)
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Threads(e.to_string()))?;
    let seed = opts.seed.or(scenario.seed);
    let (sys, outcome) = pool.install(|| -> Result<_, CliError> {
        let sys = system::build(&scenario.system)?;
        let outcome = runner::run_task(scenario, &sys, seed)?;
        Ok((sys, outcome))
    })?;

    let out_dir =
        opts.out.clone().or_else(|| scenario.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let artifacts = output::write_artifacts(&out_dir, &outcome)?;
    let run = (!opts.canonical).then(|| RunInfo {
        started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
        version: env!("CARGO_PKG_VERSION"),
    });
    let report = Report {
        schema_version: SCHEMA_VERSION,
        scenario: &scenario.name,
        task: scenario.task.name(),
        seed,
        system: &sys.info,
        holds: outcome.holds,
        counterexample: outcome.result.get("counterexample").cloned(),
        result: outcome.result,
        artifacts,
        run,
    };
    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Write { path: path.clone(), source: e })?;
    Ok(RunSummary { holds: report.holds, out_dir, report: path })
}
