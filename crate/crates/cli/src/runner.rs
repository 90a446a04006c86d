//! One function per task kind. Each returns the JSON result block, whether
//! the asserted property holds and the tables and trajectories to write.

use serde_json::json;
use uspas::certcheck::{
    assess_ua, assess_uas, assess_us, check_uas, check_ub, check_uspas, BallPair, CheckConfig, Ensemble, StabilityVerdict,
};
use uspas::robot::{ball_samples, falsify_decrease, RobotLyapunov};
use uspas::synth::{synthesize_cascade_bound, usas_variant_check, validate_estimate, SynthesizedEstimate};
use uspas::sysmodel::{
    ensemble, integrate, InitialCondition, InitialConditionSampler, IntegrateOptions, SamplerKind, SamplingPlan, StopWhen,
    Trajectory,
};

use crate::output::{Outcome, Table};
use crate::scenario::{
    BoundednessTask, CheckTask, DsetTask, RobotDemoTask, RobotForm, Scenario, SimulateTask, SynthTask, Task, UspasTask,
};
use crate::system::BuiltSystem;
use crate::CliError;

/// Sampling radius standing in for an infinite outer ball in tables.
const GLOBAL_TABLE_RADIUS: f64 = 100.0;

struct Ctx<'a> {
    scenario: &'a Scenario,
    sys: &'a BuiltSystem,
    seed: Option<u64>,
    opts: IntegrateOptions,
}

impl Ctx<'_> {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or(CliError::MissingSeed(self.scenario.task.name()))
    }

    fn plan(&self, seed: u64) -> SamplingPlan {
        let s = &self.scenario.sampling;
        SamplingPlan {
            directions: s.directions,
            radii: s.radii,
            min_radius_fraction: s.min_radius_fraction,
            t0_fractions: s.t0_fractions.clone(),
            seed,
        }
    }

    fn uniform_sampler(&self, radius: f64, count: usize, horizon: f64, seed: u64) -> InitialConditionSampler {
        InitialConditionSampler {
            kind: SamplerKind::UniformBall { radius, count },
            t0_probes: self.plan(seed).t0_probes(horizon),
            seed,
        }
    }

    fn check_config(&self, horizon: f64, tail_tol: Option<f64>, outer: f64) -> Result<CheckConfig, CliError> {
        let seed = self.seed()?;
        let mut cfg = CheckConfig::new(horizon, seed);
        cfg.plan = self.plan(seed);
        cfg.integrate = self.opts.clone();
        cfg.tail_tol = tail_tol;
        if let Some(n) = self.scenario.sampling.uniform {
            let radius = if outer.is_finite() { outer } else { GLOBAL_TABLE_RADIUS };
            cfg.sampler = Some(self.uniform_sampler(radius, n, horizon, seed));
        }
        Ok(cfg)
    }

    fn max_trajectories(&self) -> usize {
        self.scenario.sampling.max_trajectories
    }

    /// Integrate a few initial conditions for the CSV output; failures are skipped.
    fn sample_trajectories(
        &self,
        prefix: &str,
        theta: &[f64],
        ics: &[InitialCondition],
        horizon: f64,
    ) -> Vec<(String, Trajectory)> {
        ics.iter()
            .take(self.max_trajectories())
            .enumerate()
            .filter_map(|(k, ic)| {
                let tr = integrate(self.sys.field.as_ref(), ic.t0, &ic.x0, theta, horizon, &self.opts).ok()?;
                Some((format!("{prefix}_{k:03}"), tr))
            })
            .collect()
    }

    fn counterexample_trajectory(&self, verdict: &StabilityVerdict, theta: &[f64]) -> Option<(String, Trajectory)> {
        let cx = verdict.counterexample.as_ref()?;
        let tr = integrate(self.sys.field.as_ref(), cx.t0, &cx.x0, theta, verdict.horizon, &self.opts).ok()?;
        Some(("counterexample".into(), tr))
    }
}

fn table_radius(outer: f64) -> f64 {
    if outer.is_finite() {
        outer
    } else {
        GLOBAL_TABLE_RADIUS
    }
}

/// Tables for whichever witnesses a verdict carries.
fn witness_tables(v: &StabilityVerdict, smax: f64) -> Result<Vec<(String, Table)>, CliError> {
    let w = &v.witnesses;
    let mut out = Vec::new();
    if let Some(eta) = &w.eta {
        out.push(("eta".to_string(), Table::of_function(eta, smax)?));
    }
    if let Some(sigma) = &w.sigma {
        out.push(("sigma".to_string(), Table::of_function(sigma, v.horizon)?));
    }
    if let Some(gamma) = &w.gamma {
        out.push(("gamma".to_string(), Table::of_function(gamma, smax)?));
    }
    if let Some(beta) = &w.beta {
        out.push(("beta".to_string(), Table::of_kl(beta, smax, v.horizon)?));
    }
    Ok(out)
}

pub fn run_task(scenario: &Scenario, sys: &BuiltSystem, seed: Option<u64>) -> Result<Outcome, CliError> {
    let ctx = Ctx { scenario, sys, seed, opts: scenario.integrator.options()? };
    match &scenario.task {
        Task::Simulate(t) => simulate(&ctx, t),
        Task::CheckUs(t) => check(&ctx, t, Kind::Us),
        Task::CheckUa(t) => check(&ctx, t, Kind::Ua),
        Task::CheckUas(t) => check(&ctx, t, Kind::Uas),
        Task::CheckUb(t) => boundedness(&ctx, t),
        Task::Dset(t) => dset(&ctx, t),
        Task::Uspas(t) => uspas(&ctx, t),
        Task::Synthesize(t) => synthesize(&ctx, t, false),
        Task::Validate(t) => synthesize(&ctx, t, true),
        Task::RobotDemo(t) => robot_demo(&ctx, t),
    }
}

fn simulate(ctx: &Ctx, task: &SimulateTask) -> Result<Outcome, CliError> {
    if ctx.sys.robot.is_some() && task.theta.is_none() && task.radius.is_none() {
        return Err(CliError::Invalid("robot simulation needs task.radius or task.theta".into()));
    }
    let balls = task.radius.map(|r| BallPair::new(0.0, r)).transpose()?;
    let theta = ctx.sys.theta_for(task.theta.as_deref(), balls)?;
    let dim = ctx.sys.info.dim;
    if let Some(bad) = task.initial_states.iter().find(|x| x.len() != dim) {
        return Err(CliError::Invalid(format!("initial state {bad:?} does not have dimension {dim}")));
    }
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for (k, x0) in task.initial_states.iter().enumerate() {
        match integrate(ctx.sys.field.as_ref(), task.t0, x0, &theta, task.horizon, &ctx.opts) {
            Ok(tr) => {
                let last = tr.last().to_vec();
                rows.push(json!({
                    "x0": x0,
                    "final_time": tr.time(tr.len() - 1),
                    "final_state": last,
                    "final_norm": uspas::certcheck::norm(&last),
                }));
                trajectories.push((format!("traj_{k:03}"), tr));
            }
            Err(e) => rows.push(json!({ "x0": x0, "error": e })),
        }
    }
    Ok(Outcome {
        holds: true,
        result: json!({ "theta": theta, "t0": task.t0, "horizon": task.horizon, "runs": rows }),
        trajectories,
        envelopes: vec![],
    })
}

#[derive(Clone, Copy)]
enum Kind {
    Us,
    Ua,
    Uas,
}

fn check(ctx: &Ctx, task: &CheckTask, kind: Kind) -> Result<Outcome, CliError> {
    let balls = BallPair::new(task.inner, task.outer)?;
    let theta = ctx.sys.theta_for(task.theta.as_deref(), Some(balls))?;
    let cfg = ctx.check_config(task.horizon, task.tail_tol, balls.outer)?;
    let sampler = cfg.sampler_for(&balls);
    let ens = Ensemble::run(ctx.sys.field.as_ref(), &theta, &sampler, cfg.horizon, &cfg.integrate)?;
    let tol = cfg.tail_tol_for(&balls);
    let verdict = match kind {
        Kind::Us => assess_us(&ens, balls)?,
        Kind::Ua => assess_ua(&ens, balls, tol)?,
        Kind::Uas => assess_uas(&ens, balls, tol)?,
    };
    let mut trajectories: Vec<(String, Trajectory)> = ens
        .results
        .iter()
        .filter_map(|r| r.as_ref().ok().cloned())
        .take(ctx.max_trajectories())
        .enumerate()
        .map(|(k, tr)| (format!("sample_{k:03}"), tr))
        .collect();
    trajectories.extend(ctx.counterexample_trajectory(&verdict, &theta));
    let envelopes = witness_tables(&verdict, table_radius(balls.outer))?;
    let mut result = serde_json::to_value(&verdict)?;
    result["theta"] = json!(theta);
    Ok(Outcome { holds: verdict.holds, result, trajectories, envelopes })
}

fn boundedness(ctx: &Ctx, task: &BoundednessTask) -> Result<Outcome, CliError> {
    let balls = BallPair::new(0.0, task.radius)?;
    let theta = ctx.sys.theta_for(task.theta.as_deref(), Some(balls))?;
    let cfg = ctx.check_config(task.horizon, None, task.radius)?;
    let verdict = check_ub(ctx.sys.field.as_ref(), &theta, task.radius, &cfg)?;
    let ics = cfg.sampler_for(&balls).generate(ctx.sys.info.dim);
    let mut trajectories = ctx.sample_trajectories("sample", &theta, &ics, task.horizon);
    trajectories.extend(ctx.counterexample_trajectory(&verdict, &theta));
    let envelopes = witness_tables(&verdict, task.radius)?;
    let mut result = serde_json::to_value(&verdict)?;
    result["theta"] = json!(theta);
    Ok(Outcome { holds: verdict.holds, result, trajectories, envelopes })
}

fn grid_points(ctx: &Ctx, task: &DsetTask) -> Result<Vec<Vec<f64>>, CliError> {
    let g = &task.grid;
    let given = [g.points.is_some(), g.axes.is_some(), g.gain_scales.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        return Err(CliError::Invalid("task.grid needs exactly one of points, axes or gain_scales".into()));
    }
    let points = if let Some(p) = &g.points {
        p.clone()
    } else if let Some(axes) = &g.axes {
        axes.iter().fold(vec![vec![]], |acc, axis| {
            acc.iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p: Vec<f64> = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect()
        })
    } else {
        let robot = ctx.sys.robot.as_ref().ok_or_else(|| CliError::Invalid("gain_scales needs the robot system".into()))?;
        let scales = g.gain_scales.as_ref().expect("counted above");
        scales.iter().map(|&s| robot.theta(&robot.calibration.schedule.scaled(s).gains(task.outer))).collect()
    };
    points.into_iter().map(|p| ctx.sys.checked_theta(p)).collect()
}

fn dset(ctx: &Ctx, task: &DsetTask) -> Result<Outcome, CliError> {
    let balls = BallPair::new(task.inner, task.outer)?;
    let grid = grid_points(ctx, task)?;
    if grid.is_empty() {
        return Err(CliError::Invalid("task.grid is empty".into()));
    }
    let cfg = ctx.check_config(task.horizon, task.tail_tol, balls.outer)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut table = Vec::with_capacity(grid.len());
    for (k, theta) in grid.iter().enumerate() {
        let v = check_uas(ctx.sys.field.as_ref(), theta, balls, &cfg)?;
        rows.push(json!({
            "theta": theta,
            "holds": v.holds,
            "status": v.status,
            "failed_samples": v.failed_samples,
            "counterexample": v.counterexample,
        }));
        let mut row = vec![k as f64];
        row.extend(theta);
        row.push(if v.holds { 1.0 } else { 0.0 });
        table.push(row);
    }
    let passing = rows.iter().filter(|r| r["holds"] == json!(true)).count();
    let mut header = vec!["index".to_string()];
    header.extend((1..=ctx.sys.info.param_dim).map(|i| format!("theta{i}")));
    header.push("holds".into());
    Ok(Outcome {
        // The inner approximation of the D-set must not be empty.
        holds: passing > 0,
        result: json!({ "balls": balls, "grid_points": grid.len(), "passing": passing, "rows": rows }),
        trajectories: vec![],
        envelopes: vec![("dset".into(), Table { header, rows: table })],
    })
}

fn uspas(ctx: &Ctx, task: &UspasTask) -> Result<Outcome, CliError> {
    let mut entries = Vec::with_capacity(task.schedule.len());
    for row in &task.schedule {
        let balls = BallPair::new(row.inner, row.outer)?;
        if row.theta.is_none() && !ctx.sys.has_oracle() {
            return Err(CliError::Invalid(format!(
                "schedule row ({}, {}) has no theta and the system cannot choose one",
                row.inner, row.outer
            )));
        }
        entries.push((balls, ctx.sys.theta_for(row.theta.as_deref(), Some(balls))?));
    }
    let schedule: Vec<BallPair> = entries.iter().map(|e| e.0).collect();
    let outer = schedule.iter().map(|b| b.outer).fold(0.0, f64::max);
    let cfg = ctx.check_config(task.horizon, task.tail_tol, outer)?;
    let oracle = |b: BallPair| entries.iter().find(|e| e.0 == b).map(|e| e.1.clone()).unwrap_or_default();
    let verdict = check_uspas(ctx.sys.field.as_ref(), oracle, task.parameter_box.as_ref(), &schedule, &cfg)?;
    let last = schedule.last().expect("schedule checked non-empty");
    let mut trajectories = Vec::new();
    if let Some(e) = entries.iter().find(|e| verdict.counterexample.is_some() && e.1 == failing_theta(&verdict)) {
        trajectories.extend(ctx.counterexample_trajectory(&verdict, &e.1));
    }
    let envelopes = witness_tables(&verdict, table_radius(last.outer))?;
    Ok(Outcome { holds: verdict.holds, result: serde_json::to_value(&verdict)?, trajectories, envelopes })
}

fn failing_theta(v: &StabilityVerdict) -> Vec<f64> {
    v.schedule.iter().find(|e| !e.holds).map(|e| e.theta.clone()).unwrap_or_default()
}

fn estimate_tables(est: &SynthesizedEstimate, tmax: f64) -> Result<Vec<(String, Table)>, CliError> {
    Ok(vec![
        ("eta".into(), Table::of_function(&est.eta, est.outer)?),
        ("c3".into(), Table::of_function(&est.c3, est.outer)?),
        ("beta".into(), Table::of_kl(&est.beta, est.outer, tmax)?),
    ])
}

fn synthesize(ctx: &Ctx, task: &SynthTask, validate: bool) -> Result<Outcome, CliError> {
    let balls1 = BallPair::new(task.inner1, task.outer1)?;
    let balls2 = BallPair::new(task.inner2, task.outer2)?;
    let (inputs, sampled) = ctx.sys.cascade_inputs(task.inputs.as_ref(), balls1, balls2, task.certificate_samples, ctx.seed)?;
    let est = if task.inner1 == 0.0 && task.inner2 == 0.0 {
        usas_variant_check(&inputs.cert, &inputs.beta2, &inputs.coupling, &inputs.gamma)?
    } else {
        synthesize_cascade_bound(&inputs.cert, &inputs.beta2, &inputs.coupling, &inputs.gamma)?
    };
    let mut result = json!({ "estimate": est });
    if let Some(s) = sampled {
        result["sampled_certificate"] = s;
    }
    if !validate {
        let tmax = est.t2.map_or(10.0, |t2| 2.0 * t2.max(1.0));
        let envelopes = estimate_tables(&est, tmax)?;
        return Ok(Outcome { holds: true, result, trajectories: vec![], envelopes });
    }
    let (samples, horizon) = match (task.samples, task.horizon) {
        (Some(n), Some(h)) => (n, h),
        _ => return Err(CliError::Invalid("task validate needs samples and horizon".into())),
    };
    let theta = ctx.sys.theta_for(task.theta.as_deref(), Some(BallPair::new(0.0, est.outer)?))?;
    let seed = ctx.seed()?;
    let mut cfg = CheckConfig::new(horizon, seed);
    cfg.integrate = ctx.opts.clone();
    let sampler = ctx.uniform_sampler(est.outer, samples, horizon, seed);
    cfg.sampler = Some(sampler.clone());
    let verdict = validate_estimate(ctx.sys.field.as_ref(), &theta, &est, &cfg)?;
    let ics = sampler.generate(ctx.sys.info.dim);
    let mut trajectories = ctx.sample_trajectories("sample", &theta, &ics, horizon);
    trajectories.extend(ctx.counterexample_trajectory(&verdict, &theta));
    result["theta"] = json!(theta);
    result["validation"] = serde_json::to_value(&verdict)?;
    if let Some(cx) = &verdict.counterexample {
        result["counterexample"] = serde_json::to_value(cx)?;
    }
    Ok(Outcome { holds: verdict.holds, result, trajectories, envelopes: estimate_tables(&est, horizon)? })
}

fn robot_demo(ctx: &Ctx, task: &RobotDemoTask) -> Result<Outcome, CliError> {
    let robot = ctx.sys.robot.as_ref().ok_or_else(|| CliError::Invalid("robot-demo needs the robot system".into()))?;
    if robot.form != RobotForm::Cascade {
        return Err(CliError::Invalid("robot-demo runs the cascade form".into()));
    }
    let seed = ctx.seed()?;
    let dim = ctx.sys.info.dim;
    if let Some(bad) = task.initial_states.iter().find(|x| x.len() != dim) {
        return Err(CliError::Invalid(format!("initial state {bad:?} does not have dimension {dim}")));
    }
    let mut opts = ctx.opts.clone();
    opts.stop = Some(StopWhen { leading: ctx.sys.driven_dim.unwrap_or(dim), radius: task.tolerance });
    let plant = robot.plant();
    let mut holds = true;
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    let mut envelopes = Vec::new();
    for (idx, &radius) in task.radii.iter().enumerate() {
        let gains = robot.gains(radius);
        gains.validate()?;
        let theta = robot.theta(&gains);
        let mut states = ball_samples(dim, 0.9 * radius, task.samples, seed.wrapping_add(idx as u64));
        states.extend(task.initial_states.iter().cloned());
        let ics: Vec<InitialCondition> = states.into_iter().map(|x0| InitialCondition { t0: 0.0, x0 }).collect();
        let results = ensemble(ctx.sys.field.as_ref(), &ics, &theta, task.horizon, &opts);
        let mut converged = 0;
        let mut worst_settle = 0.0f64;
        let mut failures = Vec::new();
        let mut table = Vec::with_capacity(ics.len());
        for (k, (ic, res)) in ics.iter().zip(&results).enumerate() {
            let norm0 = uspas::certcheck::norm(&ic.x0);
            match res {
                Ok(tr) if tr.stopped_early => {
                    converged += 1;
                    let settle = tr.time(tr.len() - 1) - ic.t0;
                    worst_settle = worst_settle.max(settle);
                    table.push(vec![k as f64, norm0, settle]);
                }
                Ok(tr) => {
                    let lead = ctx.sys.driven_dim.unwrap_or(dim);
                    let last = tr.last();
                    failures.push(json!({ "x0": ic.x0, "final_norm": uspas::certcheck::norm(&last[..lead]) }));
                    table.push(vec![k as f64, norm0, f64::INFINITY]);
                }
                Err(e) => {
                    failures.push(json!({ "x0": ic.x0, "error": e }));
                    table.push(vec![k as f64, norm0, f64::INFINITY]);
                }
            }
        }
        let mut row = json!({
            "radius": radius,
            "gains": gains,
            "theta": theta,
            "samples": ics.len(),
            "converged": converged,
            "worst_settling_time": worst_settle,
            "failures": failures.iter().take(5).collect::<Vec<_>>(),
        });
        let mut ok = converged == ics.len();
        if task.decrease_samples > 0 {
            let v = RobotLyapunov::new(plant.arm.clone(), plant.target, gains);
            let report = falsify_decrease(&v, radius, task.decrease_samples, seed.wrapping_add(1000 + idx as u64));
            ok &= report.holds();
            row["decrease"] = serde_json::to_value(&report)?;
        }
        row["holds"] = json!(ok);
        holds &= ok;
        rows.push(row);
        for (k, res) in results.iter().enumerate().take(ctx.max_trajectories()) {
            if let Ok(tr) = res {
                trajectories.push((format!("radius{idx}_{k:03}"), tr.clone()));
            }
        }
        envelopes.push((
            format!("settling_radius{idx}"),
            Table { header: vec!["sample".into(), "initial_norm".into(), "settling_time".into()], rows: table },
        ));
    }
    Ok(Outcome {
        holds,
        result: json!({ "tolerance": task.tolerance, "horizon": task.horizon, "radii": rows }),
        trajectories,
        envelopes,
    })
}
