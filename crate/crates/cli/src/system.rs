//! Turns a [`SystemSpec`] into a vector field plus what the tasks need to
//! know about it.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use uspas::catalog::{self, CascadeInputs};
use uspas::certcheck::BallPair;
use uspas::robot::{
    bundled_calibration, closed_loop_cascade, estimate_constants, Calibration, DirectLoop, PidGains, Plant, TwoLinkArm,
};
use uspas::synth::{Decay, LyapunovCertificate, SubsystemBound};
use uspas::sysmodel::{compose_cascade, CascadeSystem, ConstantCoupling, FnSystem, VectorField};

use crate::scenario::{Builtin, InputsSpec, RobotForm, RobotSpec, SystemSpec};
use crate::CliError;

/// Short description echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct SystemInfo {
    pub kind: String,
    pub dim: usize,
    pub param_dim: usize,
}

pub struct RobotSetup {
    pub calibration: Calibration,
    pub form: RobotForm,
    pub gains: Option<PidGains>,
}

impl RobotSetup {
    pub fn plant(&self) -> Plant<2, TwoLinkArm> {
        self.calibration.plant()
    }

    pub fn gains(&self, radius: f64) -> PidGains {
        self.gains.unwrap_or_else(|| self.calibration.schedule.gains(radius))
    }

    pub fn theta(&self, gains: &PidGains) -> Vec<f64> {
        match self.form {
            RobotForm::Cascade => gains.cascade_theta(self.calibration.extra_resistance),
            RobotForm::Direct => gains.direct_theta(self.calibration.extra_resistance),
        }
    }
}

pub struct BuiltSystem {
    pub field: Arc<dyn VectorField>,
    pub info: SystemInfo,
    pub builtin: Option<Builtin>,
    /// Parameter used when the task does not give one.
    pub theta: Vec<f64>,
    pub robot: Option<RobotSetup>,
    /// Number of leading state components forming the driven subsystem.
    pub driven_dim: Option<usize>,
}

impl BuiltSystem {
    /// Parameter for the balls `balls`: explicit, scheduled or the default.
    pub fn theta_for(&self, explicit: Option<&[f64]>, balls: Option<BallPair>) -> Result<Vec<f64>, CliError> {
        if let Some(t) = explicit {
            return self.checked_theta(t.to_vec());
        }
        if let (Some(robot), Some(b)) = (&self.robot, balls) {
            return Ok(robot.theta(&robot.gains(b.outer)));
        }
        if let (Some(Builtin::ScalarFamily), Some(b)) = (self.builtin, balls) {
            if b.inner > 0.0 && self.theta.is_empty() {
                return Ok(catalog::scalar_family_theta(b));
            }
        }
        self.checked_theta(self.theta.clone())
    }

    pub fn checked_theta(&self, theta: Vec<f64>) -> Result<Vec<f64>, CliError> {
        if theta.len() != self.info.param_dim {
            return Err(CliError::Invalid(format!(
                "parameter vector has length {}, the system expects {}",
                theta.len(),
                self.info.param_dim
            )));
        }
        Ok(theta)
    }

    /// Whether the system can choose a parameter for every ball pair.
    pub fn has_oracle(&self) -> bool {
        self.robot.is_some() || (self.builtin == Some(Builtin::ScalarFamily) && self.theta.is_empty())
    }

    /// Synthesis inputs on the given balls, from the scenario or the system.
    pub fn cascade_inputs(
        &self,
        explicit: Option<&InputsSpec>,
        balls1: BallPair,
        balls2: BallPair,
        certificate_samples: usize,
        seed: Option<u64>,
    ) -> Result<(CascadeInputs, Option<serde_json::Value>), CliError> {
        if let Some(spec) = explicit {
            let cert = LyapunovCertificate {
                lower: spec.lower.clone(),
                upper: spec.upper.clone(),
                decay: Decay::Exponential { k: spec.rate },
                grad_bound: spec.grad_bound.clone(),
                annulus: balls1,
                theta: vec![],
                function: None,
            };
            cert.validate()?;
            let inputs = CascadeInputs {
                cert,
                beta2: SubsystemBound { beta: spec.beta2.clone(), balls: balls2 },
                coupling: spec.coupling.clone(),
                gamma: spec.gamma.clone(),
            };
            return Ok((inputs, None));
        }
        if self.builtin == Some(Builtin::LinearCascade) {
            return Ok((catalog::linear_cascade_inputs(balls1, balls2), None));
        }
        if let Some(robot) = &self.robot {
            if robot.form != RobotForm::Cascade {
                return Err(CliError::Invalid("synthesis needs the robot in cascade form".into()));
            }
            if balls1.inner != 0.0 || balls2.inner != 0.0 || balls1.outer != balls2.outer {
                return Err(CliError::Invalid("robot synthesis uses zero inner radii and one common outer radius".into()));
            }
            let seed = seed.ok_or(CliError::MissingSeed("synthesize"))?;
            let radius = balls1.outer;
            let (inputs, sampled) =
                robot.calibration.cascade_inputs_with(robot.gains(radius), radius, certificate_samples, seed)?;
            return Ok((inputs, Some(serde_json::to_value(sampled)?)));
        }
        Err(CliError::Invalid("this system has no built-in synthesis inputs; give task.inputs".into()))
    }
}

fn matrix(name: &str, rows: &[Vec<f64>], cols: Option<usize>) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = cols.unwrap_or(n);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Invalid(format!("system.{name} must be a non-empty {n} x {m} matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn linear_field(a: DMatrix<f64>) -> FnSystem<impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync> {
    let n = a.nrows();
    FnSystem::new(n, 0, move |_t, x, _th, dx| {
        for (i, d) in dx.iter_mut().enumerate() {
            *d = (0..n).map(|j| a[(i, j)] * x[j]).sum();
        }
    })
}

fn robot_setup(spec: &RobotSpec) -> Result<RobotSetup, CliError> {
    let mut cal = bundled_calibration()?;
    if let Some(arm) = &spec.arm {
        cal.constants = estimate_constants(arm, cal.constants.samples, cal.constants.seed);
        cal.arm = arm.clone();
    }
    if let Some(m) = spec.motor {
        cal.motor = m;
    }
    if let Some(t) = spec.target {
        cal.target = t;
    }
    if let Some(e) = spec.estimate {
        cal.estimate = e;
    }
    if let Some(r) = spec.extra_resistance {
        cal.extra_resistance = r;
    }
    if let Some(s) = spec.schedule {
        cal.schedule = s;
    }
    let gains = spec.gains.map(|g| PidGains::from_reduced(g.k_d, g.kp_reduced, g.k_i, g.eps1));
    if let Some(g) = &gains {
        g.validate()?;
    }
    Ok(RobotSetup { calibration: cal, form: spec.form, gains })
}

pub fn build(spec: &SystemSpec) -> Result<BuiltSystem, CliError> {
    let (field, kind, builtin, theta, robot, driven): (Arc<dyn VectorField>, String, _, _, _, _) = match spec {
        SystemSpec::Builtin { name, theta } => {
            let field: Arc<dyn VectorField> = match name {
                Builtin::LinearCascade => Arc::new(catalog::linear_cascade()),
                Builtin::ForcedDecay => Arc::new(catalog::forced_decay()),
                Builtin::ScalarFamily => Arc::new(catalog::scalar_family()),
                Builtin::UnstableScalar => Arc::new(catalog::unstable_scalar()),
            };
            let driven = (*name == Builtin::LinearCascade).then_some(1);
            let label = serde_json::to_value(name).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            (field, label, Some(*name), theta.clone(), None, driven)
        }
        SystemSpec::Linear { a } => (Arc::new(linear_field(matrix("a", a, None)?)), "linear".into(), None, vec![], None, None),
        SystemSpec::Cascade { a1, a2, coupling } => {
            let a1 = matrix("a1", a1, None)?;
            let a2 = matrix("a2", a2, None)?;
            let b = matrix("coupling", coupling, Some(a2.nrows()))?;
            if b.nrows() != a1.nrows() {
                return Err(CliError::Invalid("system.coupling must have as many rows as a1".into()));
            }
            let n1 = a1.nrows();
            let c = CascadeSystem::new(Arc::new(linear_field(a1)), Arc::new(linear_field(a2)), Arc::new(ConstantCoupling(b)));
            (Arc::new(compose_cascade(c)?), "cascade".into(), None, vec![], None, Some(n1))
        }
        SystemSpec::Robot(r) => {
            let setup = robot_setup(r)?;
            let plant = setup.plant();
            let field: Arc<dyn VectorField> = match setup.form {
                RobotForm::Cascade => Arc::new(closed_loop_cascade(&plant)?),
                RobotForm::Direct => Arc::new(DirectLoop::new(plant)),
            };
            let driven = (setup.form == RobotForm::Cascade).then_some(6);
            (field, "robot".into(), None, vec![], Some(setup), driven)
        }
    };
    let info = SystemInfo { kind, dim: field.dim(), param_dim: field.param_dim() };
    Ok(BuiltSystem { field, info, builtin, theta, robot, driven_dim: driven })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_spec_matches_matrix() {
        let sys = build(&SystemSpec::Linear { a: vec![vec![0.0, 1.0], vec![-2.0, -3.0]] }).unwrap();
        let mut dx = [0.0; 2];
        sys.field.rhs(0.0, &[1.0, 2.0], &[], &mut dx);
        assert_eq!(dx, [2.0, -8.0]);
    }

    #[test]
    fn cascade_spec_stacks() {
        let spec = SystemSpec::Cascade { a1: vec![vec![-1.0]], a2: vec![vec![-2.0]], coupling: vec![vec![3.0]] };
        let sys = build(&spec).unwrap();
        let mut dx = [0.0; 2];
        sys.field.rhs(0.0, &[1.0, 1.0], &[], &mut dx);
        assert_eq!(dx, [2.0, -2.0]);
        assert_eq!(sys.driven_dim, Some(1));
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(build(&SystemSpec::Linear { a: vec![vec![1.0], vec![1.0, 2.0]] }).is_err());
    }

    #[test]
    fn robot_theta_follows_schedule() {
        let sys = build(&SystemSpec::Robot(RobotSpec::default())).unwrap();
        let b = BallPair::new(0.0, 5.0).unwrap();
        let theta = sys.theta_for(None, Some(b)).unwrap();
        assert_eq!(theta.len(), 5);
        assert_eq!(sys.info.dim, 8);
    }
}
