//! Simulation, empirical checking and constructive synthesis of practical
//! stability certificates for parameterized, time-varying cascaded ODEs.
//!
//! * [`compfn`]: class K / K∞ / L comparison functions and KL bounds.
//! * [`sysmodel`]: vector fields, cascades, integrators and trajectory ensembles.
//! * [`certcheck`]: sampling-based verdicts for stability of a ball on a ball.
//! * [`synth`]: Lyapunov-based bounds and the cascade synthesis pipeline.
//! * [`robot`]: a two-link arm driven by DC motors under PID control.
//! * [`catalog`]: small systems with known certificates.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod certcheck;
pub mod compfn;
pub mod robot;
pub mod synth;
pub mod sysmodel;

pub use certcheck::{BallPair, Property, StabilityVerdict};
pub use compfn::{ComparisonFunction, Kind, KlBound};
pub use synth::{LyapunovCertificate, SynthesizedEstimate};
pub use sysmodel::{CascadeSystem, Trajectory, VectorField};
