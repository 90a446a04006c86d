//! Scenario file schema. A scenario is a TOML document naming one system and
//! one task, each as a table keyed by its kind; see `scenarios/` for examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use uspas::certcheck::ParameterBox;
use uspas::compfn::{ComparisonFunction, KlBound};
use uspas::robot::{GainSchedule, GravityEstimate, MotorModel, TwoLinkArm};
use uspas::synth::GammaSurface;
use uspas::sysmodel::{IntegrateOptions, Method};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Default output directory, relative to the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub system: SystemSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    pub task: Task,
}

/// Externally tagged: `[system.builtin]`, `[system.cascade]`, `[system.robot]`, ...
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Builtin {
        name: Builtin,
        #[serde(default)]
        theta: Vec<f64>,
    },
    /// `x' = A x`
    Linear { a: Vec<Vec<f64>> },
    /// `x1' = A1 x1 + B x2`, `x2' = A2 x2`
    Cascade { a1: Vec<Vec<f64>>, a2: Vec<Vec<f64>>, coupling: Vec<Vec<f64>> },
    /// Two-link arm with DC motors under the scheduled PID law.
    Robot(RobotSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `x1' = -x1 + x2`, `x2' = -x2`
    LinearCascade,
    /// `x' = -x + c u(t)` on R², parameters `[c, w, phi]`
    ForcedDecay,
    /// `x' = -theta x + 0.1 sin t`
    ScalarFamily,
    /// `x' = x`
    UnstableScalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotForm {
    /// State `(q - q*, q', s, i - i*)`.
    #[default]
    Cascade,
    /// State `(q, q', nu, i)`.
    Direct,
}

/// Overrides of the bundled calibration. Anything left out is taken from it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    #[serde(default)]
    pub form: RobotForm,
    pub arm: Option<TwoLinkArm>,
    pub motor: Option<MotorModel>,
    pub target: Option<[f64; 2]>,
    pub estimate: Option<GravityEstimate>,
    pub extra_resistance: Option<f64>,
    pub schedule: Option<GainSchedule>,
    /// Fixed gains used for every radius instead of the schedule.
    pub gains: Option<GainsSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub k_d: f64,
    /// Reduced proportional gain `k_p - k_i / eps1`.
    pub kp_reduced: f64,
    pub k_i: f64,
    pub eps1: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    pub directions: usize,
    pub radii: usize,
    pub min_radius_fraction: f64,
    /// Initial-time probes as multiples of the horizon.
    pub t0_fractions: Vec<f64>,
    /// Sample this many states uniformly in the outer ball instead of shells.
    pub uniform: Option<usize>,
    /// Number of sampled trajectories written as CSV.
    pub max_trajectories: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        let plan = uspas::sysmodel::SamplingPlan::default();
        Self {
            directions: plan.directions,
            radii: plan.radii,
            min_radius_fraction: plan.min_radius_fraction,
            t0_fractions: plan.t0_fractions,
            uniform: None,
            max_trajectories: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Rk4,
    #[default]
    Rk45,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub method: MethodName,
    /// Step of RK4.
    pub step: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub output_step: Option<f64>,
    pub max_steps: Option<u64>,
}

impl IntegratorSpec {
    pub fn options(&self) -> Result<IntegrateOptions, CliError> {
        let method = match self.method {
            MethodName::Rk4 => {
                Method::Rk4 { step: self.step.ok_or_else(|| CliError::Invalid("integrator.step is required for rk4".into()))? }
            }
            MethodName::Rk45 => {
                let Method::Rk45 { rtol, atol } = Method::default() else { unreachable!() };
                Method::Rk45 { rtol: self.rtol.unwrap_or(rtol), atol: self.atol.unwrap_or(atol) }
            }
        };
        let mut opts = IntegrateOptions::with_method(method);
        opts.output_step = self.output_step;
        if let Some(n) = self.max_steps {
            opts.max_steps = n;
        }
        Ok(opts)
    }
}

/// Externally tagged: `[task.validate]`, `[task.check-us]`, ...
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate(SimulateTask),
    CheckUs(CheckTask),
    CheckUa(CheckTask),
    CheckUas(CheckTask),
    CheckUb(BoundednessTask),
    Dset(DsetTask),
    Uspas(UspasTask),
    Synthesize(SynthTask),
    Validate(SynthTask),
    RobotDemo(RobotDemoTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate(_) => "simulate",
            Task::CheckUs(_) => "check-us",
            Task::CheckUa(_) => "check-ua",
            Task::CheckUas(_) => "check-uas",
            Task::CheckUb(_) => "check-ub",
            Task::Dset(_) => "dset",
            Task::Uspas(_) => "uspas",
            Task::Synthesize(_) => "synthesize",
            Task::Validate(_) => "validate",
            Task::RobotDemo(_) => "robot-demo",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    pub horizon: f64,
    #[serde(default)]
    pub t0: f64,
    pub initial_states: Vec<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    /// Radius whose scheduled gains are used for the robot.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckTask {
    pub inner: f64,
    #[serde(deserialize_with = "radius")]
    pub outer: f64,
    pub horizon: f64,
    pub tail_tol: Option<f64>,
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundednessTask {
    pub radius: f64,
    pub horizon: f64,
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsetTask {
    pub inner: f64,
    #[serde(deserialize_with = "radius")]
    pub outer: f64,
    pub horizon: f64,
    pub tail_tol: Option<f64>,
    pub grid: GridSpec,
}

/// Exactly one of the three fields must be given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Explicit parameter vectors.
    pub points: Option<Vec<Vec<f64>>>,
    /// Cartesian product of per-component values.
    pub axes: Option<Vec<Vec<f64>>>,
    /// Robot only: multiples of the gain schedule, evaluated at the outer radius.
    pub gain_scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UspasTask {
    pub horizon: f64,
    pub tail_tol: Option<f64>,
    pub schedule: Vec<ScheduleRow>,
    pub parameter_box: Option<ParameterBox>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRow {
    pub inner: f64,
    #[serde(deserialize_with = "radius")]
    pub outer: f64,
    /// Parameter for this row; builtin families supply one when omitted.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTask {
    pub inner1: f64,
    pub outer1: f64,
    pub inner2: f64,
    pub outer2: f64,
    /// Required unless the system supplies its own inputs.
    pub inputs: Option<InputsSpec>,
    pub theta: Option<Vec<f64>>,
    /// Robot only: samples used to read off the certificate constants.
    #[serde(default = "default_certificate_samples")]
    pub certificate_samples: usize,
    /// Validation only.
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
}

fn default_certificate_samples() -> usize {
    5_000
}

/// Synthesis inputs given as closed-form records.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSpec {
    pub lower: ComparisonFunction,
    pub upper: ComparisonFunction,
    /// Exponential decay rate `k` in `V' <= -k V`.
    pub rate: f64,
    pub grad_bound: ComparisonFunction,
    pub beta2: KlBound,
    pub coupling: ComparisonFunction,
    pub gamma: GammaSurface,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDemoTask {
    pub radii: Vec<f64>,
    /// Initial states per radius, drawn from the ball of radius `0.9 * radius`.
    pub samples: usize,
    pub horizon: f64,
    /// Convergence threshold on `|(q - q*, q', s)|`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Extra initial states in cascade coordinates, added for every radius.
    #[serde(default)]
    pub initial_states: Vec<Vec<f64>>,
    /// Samples for the decrease check of the Lyapunov function; 0 skips it.
    #[serde(default)]
    pub decrease_samples: usize,
}

fn default_tolerance() -> f64 {
    1e-3
}

fn radius<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Radius {
        Number(f64),
        Text(String),
    }
    match Radius::deserialize(d)? {
        Radius::Number(v) => Ok(v),
        Radius::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Radius::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}

/// Parse a scenario from TOML text, reporting the field path of schema errors.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Schema { path: String::new(), message: e.to_string() })?;
    let scenario: Scenario = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Schema { path: e.path().to_string(), message: e.into_inner().to_string() })?;
    if scenario.schema_version != SCHEMA_VERSION {
        return Err(CliError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported schema version {}, expected {SCHEMA_VERSION}", scenario.schema_version),
        });
    }
    Ok(scenario)
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    parse(&text)
}
