use std::fs;
use std::path::Path;

use serde::Serialize;
use uspas::compfn::{ComparisonFunction, KlBound};
use uspas::sysmodel::Trajectory;

use crate::CliError;

/// Number of intervals used when tabulating a comparison function.
const TABLE_INTERVALS: usize = 200;

/// A numeric table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// `s, value` for `s` evenly spaced in `[0, smax]`.
    pub fn of_function(f: &ComparisonFunction, smax: f64) -> Result<Self, CliError> {
        let rows = (0..=TABLE_INTERVALS)
            .map(|i| {
                let s = smax * i as f64 / TABLE_INTERVALS as f64;
                Ok(vec![s, f.eval(s)?])
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self { header: vec!["s".into(), "value".into()], rows })
    }

    /// `s, t, value` on five sections `s = smax / 5, ..., smax` over `[0, tmax]`.
    pub fn of_kl(beta: &KlBound, smax: f64, tmax: f64) -> Result<Self, CliError> {
        let mut rows = Vec::new();
        for k in 1..=5 {
            let s = smax * k as f64 / 5.0;
            for i in 0..=TABLE_INTERVALS {
                let t = tmax * i as f64 / TABLE_INTERVALS as f64;
                rows.push(vec![s, t, beta.eval(s, t)?]);
            }
        }
        Ok(Self { header: vec!["s".into(), "t".into(), "value".into()], rows })
    }
}

/// Everything a task produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub holds: bool,
    pub result: serde_json::Value,
    pub trajectories: Vec<(String, Trajectory)>,
    pub envelopes: Vec<(String, Table)>,
}

/// File names written next to the report, relative to the output directory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Artifacts {
    pub trajectories: Vec<String>,
    pub envelopes: Vec<String>,
}

fn fresh_dir(path: &Path) -> Result<(), CliError> {
    let wrap = |e| CliError::Write { path: path.to_path_buf(), source: e };
    if path.is_dir() {
        fs::remove_dir_all(path).map_err(wrap)?;
    }
    fs::create_dir_all(path).map_err(wrap)
}

fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        // `Display` for f64 is the shortest representation that round-trips.
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Write { path: path.to_path_buf(), source: e })
}

/// Write `trajectories/*.csv` and `envelopes/*.csv` under `out`, replacing
/// whatever an earlier run left there.
pub fn write_artifacts(out: &Path, outcome: &Outcome) -> Result<Artifacts, CliError> {
    let traj_dir = out.join("trajectories");
    let env_dir = out.join("envelopes");
    fresh_dir(&traj_dir)?;
    fresh_dir(&env_dir)?;
    let mut artifacts = Artifacts::default();
    for (name, traj) in &outcome.trajectories {
        let file = format!("{name}.csv");
        let path = traj_dir.join(&file);
        let f = fs::File::create(&path).map_err(|e| CliError::Write { path: path.clone(), source: e })?;
        traj.write_csv(std::io::BufWriter::new(f))?;
        artifacts.trajectories.push(format!("trajectories/{file}"));
    }
    for (name, table) in &outcome.envelopes {
        let file = format!("{name}.csv");
        write_table(&env_dir.join(&file), table)?;
        artifacts.envelopes.push(format!("envelopes/{file}"));
    }
    Ok(artifacts)
}
