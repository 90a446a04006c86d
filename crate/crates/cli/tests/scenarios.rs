use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use uspas_cli::{exit_code, parse, run_file, CliError, RunOptions};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn run(name: &str, out: &Path) -> Result<uspas_cli::RunSummary, CliError> {
    run_file(&scenario(name), &RunOptions { out: Some(out.to_path_buf()), canonical: true, ..RunOptions::default() })
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn linear_cascade_reports_the_synthesized_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let res = run("linear_cascade", dir.path());
    assert_eq!(exit_code(&res), 0);
    let r = report(dir.path());
    let est = &r["result"]["estimate"];
    // V1 = x1²/2, k = 2, gradient bound 5 at the outer radius, unit coupling:
    // the residual drive is 5 * 0.001 / 2 and the inner radius is
    // 0.1 + 2 sqrt(2 (0.1²/2 + 2 drive)).
    let drive = 5.0 * 0.001 / 2.0;
    let inner = 0.1 + 2.0 * (2.0f64 * (0.005 + 2.0 * drive)).sqrt();
    assert!((est["inner"].as_f64().unwrap() - inner).abs() < 1e-9);
    assert_eq!(est["outer"].as_f64().unwrap(), 5.0);
    assert!(est["beta"].is_object());
    assert_eq!(r["result"]["validation"]["samples"], 500);
    assert!(dir.path().join("envelopes/beta.csv").is_file());
    assert!(dir.path().join("trajectories/sample_000.csv").is_file());
}

#[test]
fn closed_form_records_give_the_same_estimate() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("linear_cascade", a.path()).unwrap();
    assert_eq!(exit_code(&run("custom_cascade", b.path())), 0);
    assert_eq!(report(a.path())["result"]["estimate"]["beta"], report(b.path())["result"]["estimate"]["beta"]);
}

#[test]
fn unstable_system_is_falsified_with_a_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let res = run("unstable", dir.path());
    assert_eq!(exit_code(&res), 2);
    let r = report(dir.path());
    assert_eq!(r["holds"], false);
    let cx = &r["counterexample"];
    assert!(cx["x0"][0].as_f64().unwrap().abs() <= 1.0);
    assert!(cx["reason"].is_string());
}

#[test]
fn malformed_file_names_the_field() {
    let res = run_file(&scenario("malformed"), &RunOptions::default());
    assert_eq!(exit_code(&res), 1);
    let msg = res.unwrap_err().to_string();
    assert!(msg.contains("task.check-uas.horizon"), "{msg}");
    assert!(msg.contains("line 12"), "{msg}");
}

#[test]
fn unknown_fields_and_versions_are_rejected() {
    let base = "schema_version = 1\nname = \"x\"\nseed = 1\n[system.builtin]\nname = \"linear_cascade\"\n";
    let err = parse(&format!("{base}[task.check-us]\ninner = 0.1\nouter = 1.0\nhorizon = 1.0\nhorizn = 2.0\n")).unwrap_err();
    assert!(err.to_string().contains("task.check-us"), "{err}");
    let err = parse(&base.replace("schema_version = 1", "schema_version = 7")).unwrap_err();
    assert!(err.to_string().contains("schema_version"), "{err}");
    let err = parse(&base.replace("linear_cascade", "pendulum")).unwrap_err();
    assert!(err.to_string().contains("system.builtin.name"), "{err}");
}

#[test]
fn sampling_tasks_need_a_seed() {
    let text = "schema_version = 1\nname = \"x\"\n[system.builtin]\nname = \"linear_cascade\"\n\
                [task.check-us]\ninner = 0.1\nouter = 1.0\nhorizon = 1.0\n";
    let s = parse(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { out: Some(dir.path().into()), ..RunOptions::default() };
    assert!(matches!(uspas_cli::run_scenario(&s, &opts), Err(CliError::MissingSeed("check-us"))));
    let opts = RunOptions { seed: Some(4), ..opts };
    assert!(uspas_cli::run_scenario(&s, &opts).unwrap().holds);
}

#[test]
fn canonical_reports_are_byte_identical() {
    for name in ["scalar_uspas", "forced_decay_ub", "robot_validate"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run(name, a.path()).unwrap();
        run(name, b.path()).unwrap();
        let ra = std::fs::read(a.path().join("report.json")).unwrap();
        let rb = std::fs::read(b.path().join("report.json")).unwrap();
        assert!(ra == rb, "{name} differs between runs");
    }
}

#[test]
fn non_canonical_report_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { out: Some(dir.path().into()), threads: Some(2), ..RunOptions::default() };
    run_file(&scenario("scalar_uspas"), &opts).unwrap();
    let r = report(dir.path());
    assert_eq!(r["run"]["threads"], 2);
    assert!(r["run"]["elapsed_seconds"].is_number());
}

#[test]
fn every_bundled_scenario_parses() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let res = uspas_cli::load(&path);
        let malformed = path.file_stem().unwrap() == "malformed";
        assert_eq!(res.is_err(), malformed, "{}: {:?}", path.display(), res.err());
    }
}

#[test]
fn robot_dset_contains_the_calibrated_gains() {
    let dir = tempfile::tempdir().unwrap();
    let res = run("robot_dset", dir.path());
    assert_eq!(exit_code(&res), 0);
    let rows = report(dir.path())["result"]["rows"].as_array().unwrap().clone();
    let holds: Vec<bool> = rows.iter().map(|r| r["holds"].as_bool().unwrap()).collect();
    assert!(!holds[0], "zero gains cannot hold the arm up");
    let first = holds.iter().position(|h| *h).unwrap();
    assert!(holds[first..].iter().all(|h| *h), "{holds:?}");
    assert!(holds[3]);
}

#[test]
fn robot_simulation_settles_at_the_set_point() {
    let dir = tempfile::tempdir().unwrap();
    run("robot_simulate", dir.path()).unwrap();
    let last = report(dir.path())["result"]["runs"][0]["final_state"].clone();
    let q: Vec<f64> = last.as_array().unwrap()[..2].iter().map(|v| v.as_f64().unwrap()).collect();
    let target = std::f64::consts::FRAC_PI_4;
    assert!(q.iter().all(|v| (v - target).abs() < 1e-3), "{q:?}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = |name: &str| {
        Command::new(env!("CARGO_BIN_EXE_uspas"))
            .args(["run", scenario(name).to_str().unwrap(), "--canonical", "--out"])
            .arg(dir.path().join(name))
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(status("linear_cascade"), Some(0));
    assert_eq!(status("unstable"), Some(2));
    assert_eq!(status("malformed"), Some(1));
}
