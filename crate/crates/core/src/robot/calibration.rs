use serde::{Deserialize, Serialize};

use super::arm::{ModelConstants, TwoLinkArm, Vector};
use super::control::{GainSchedule, GravityEstimate, MotorModel, PidGains, Plant};
use super::lyapunov::{coupling_gain, sample_certificate, DecreaseReport, RobotLyapunov, SampledCertificate};
use super::RobotError;
use crate::catalog::CascadeInputs;
use crate::certcheck::BallPair;
use crate::compfn::{ComparisonFunction, KlBound};
use crate::synth::SubsystemBound;

/// Result of checking the scheduled gains at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCheck {
    pub radius: f64,
    pub seed: u64,
    pub report: DecreaseReport,
}

/// Frozen gain calibration for the two-link arm, produced by the
/// `calibrate_gains` example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub arm: TwoLinkArm,
    pub motor: MotorModel,
    pub target: [f64; 2],
    pub estimate: GravityEstimate,
    pub extra_resistance: f64,
    pub constants: ModelConstants,
    /// Shape of the schedule before scaling.
    pub base: GainSchedule,
    /// Smallest scale for which no sampled violation was found, over all radii.
    pub critical_scale: f64,
    pub safety_factor: f64,
    /// `base` scaled by `critical_scale * safety_factor`.
    pub schedule: GainSchedule,
    pub checks: Vec<RadiusCheck>,
}

impl Calibration {
    pub fn plant(&self) -> Plant<2, TwoLinkArm> {
        Plant::new(self.arm.clone(), self.motor, Vector::<2>::from(self.target)).with_estimate(self.estimate)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.checks.iter().map(|c| c.radius).collect()
    }

    /// Synthesis inputs for zero inner radii on `B_radius`: the certificate is
    /// read off `samples` points of the ball, the current error decays
    /// exponentially and the coupling is bounded by `k_t / d_min`.
    pub fn cascade_inputs(
        &self,
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> Result<(CascadeInputs, SampledCertificate), RobotError> {
        self.cascade_inputs_with(self.schedule.gains(radius), radius, samples, seed)
    }

    /// As [`Calibration::cascade_inputs`] with explicit gains.
    pub fn cascade_inputs_with(
        &self,
        gains: PidGains,
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> Result<(CascadeInputs, SampledCertificate), RobotError> {
        let plant = self.plant();
        gains.validate()?;
        let v = RobotLyapunov::new(plant.arm.clone(), plant.target, gains);
        let sampled = sample_certificate(&v, radius, samples, seed)?;
        let theta = gains.cascade_theta(self.extra_resistance);
        let cert = sampled.certificate(theta[..4].to_vec())?.with_function(std::sync::Arc::new(v));
        let coupling = coupling_gain(&plant.motor, self.constants.d_min);
        let decay = plant.motor.current_decay(self.extra_resistance);
        let kappa = sampled.composite_weight(coupling, decay);
        let inputs = CascadeInputs {
            cert,
            beta2: SubsystemBound { beta: KlBound::exponential(1.0, decay), balls: BallPair::new(0.0, radius)? },
            coupling: ComparisonFunction::constant(coupling),
            gamma: sampled.gamma_surface(kappa),
        };
        Ok((inputs, sampled))
    }
}

const BUNDLED: &str = include_str!("../../data/robot_calibration.json");

/// The calibration shipped with the crate.
pub fn bundled_calibration() -> Result<Calibration, RobotError> {
    serde_json::from_str(BUNDLED).map_err(|e| RobotError::Calibration(e.to_string()))
}
