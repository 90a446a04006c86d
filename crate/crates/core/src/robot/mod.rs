//! Two-link planar arm driven by armature-controlled DC motors under PID
//! control with a current-tracking voltage law, in direct and cascade form.

mod arm;
mod calibration;
mod control;
mod lyapunov;

use thiserror::Error;

pub use arm::{estimate_constants, Manipulator, Matrix, ModelConstants, Pendulum, TwoLinkArm, Vector};
pub use calibration::{bundled_calibration, Calibration, RadiusCheck};
pub use control::{
    closed_loop_cascade, cross_weight, pid_integrator_rhs, pid_torque, voltage_law, Affine, CurrentCoupling, CurrentError,
    DirectLoop, GainSchedule, GravityEstimate, MechanicalSubsystem, MotorModel, PidGains, Plant,
};
pub use lyapunov::{
    ball_samples, coupling_gain, falsify_decrease, sample_certificate, DecreaseReport, RobotLyapunov, SampledCertificate,
};

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("inertia matrix is singular")]
    Singular,
    #[error("invalid gains: {0}")]
    Gains(String),
    #[error("certificate: {0}")]
    Certificate(String),
    #[error("calibration data: {0}")]
    Calibration(String),
    #[error(transparent)]
    Model(#[from] crate::sysmodel::ModelError),
    #[error(transparent)]
    Check(#[from] crate::certcheck::CheckError),
}
