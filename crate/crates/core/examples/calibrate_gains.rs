//! Calibrate the PID gain schedule of the two-link arm and print the frozen
//! calibration as JSON:
//!
//! ```text
//! cargo run --release -p uspas --example calibrate_gains > crates/core/data/robot_calibration.json
//! ```
//!
//! A single scale factor multiplies a fixed affine shape. For each radius the
//! smallest scale with no sampled violation of the required Lyapunov decrease
//! is found by bisection in log scale; the largest of these, times a safety
//! factor, is frozen.

use std::f64::consts::FRAC_PI_4;

use uspas::robot::{
    estimate_constants, falsify_decrease, Affine, Calibration, GainSchedule, GravityEstimate, MotorModel, RadiusCheck,
    RobotLyapunov, TwoLinkArm, Vector,
};

const RADII: [f64; 3] = [1.0, 5.0, 10.0];
const SAMPLES: usize = 20_000;
const SAFETY: f64 = 1.5;
const SEED: u64 = 2024;

fn holds(arm: &TwoLinkArm, target: Vector<2>, schedule: &GainSchedule, radius: f64, seed: u64) -> bool {
    let v = RobotLyapunov::new(arm.clone(), target, schedule.gains(radius));
    v.gains.validate().is_ok() && falsify_decrease(&v, radius, SAMPLES, seed).holds()
}

fn critical_scale(arm: &TwoLinkArm, target: Vector<2>, base: &GainSchedule, radius: f64, seed: u64) -> f64 {
    let (mut lo, mut hi) = (1e-2f64, 1e4f64);
    assert!(holds(arm, target, &base.scaled(hi), radius, seed), "no admissible scale below {hi} at radius {radius}");
    while hi / lo > 1.001 {
        let mid = (lo * hi).sqrt();
        if holds(arm, target, &base.scaled(mid), radius, seed) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn main() {
    let arm = TwoLinkArm::default();
    let target = Vector::<2>::new(FRAC_PI_4, FRAC_PI_4);
    let base =
        GainSchedule { k_d: Affine { a: 1.0, b: 0.1 }, kp_reduced: Affine { a: 2.0, b: 0.1 }, k_i: Affine { a: 8.0, b: 0.4 } };
    let critical = RADII
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let c = critical_scale(&arm, target, &base, r, SEED + k as u64);
            eprintln!("radius {r}: critical scale {c:.4}");
            c
        })
        .fold(0.0f64, f64::max);
    let schedule = base.scaled(critical * SAFETY);
    // Re-check the frozen schedule on fresh samples.
    let checks = RADII
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let seed = SEED + 100 + k as u64;
            let v = RobotLyapunov::new(arm.clone(), target, schedule.gains(r));
            let report = falsify_decrease(&v, r, SAMPLES, seed);
            assert!(report.holds(), "frozen schedule fails at radius {r}: {report:?}");
            RadiusCheck { radius: r, seed, report }
        })
        .collect();
    let cal = Calibration {
        constants: estimate_constants(&arm, 100_000, SEED),
        arm,
        motor: MotorModel::default(),
        target: [target[0], target[1]],
        estimate: GravityEstimate::JointBias { joint: 0, factor: 1.1 },
        extra_resistance: 9.0,
        base,
        critical_scale: critical,
        safety_factor: SAFETY,
        schedule,
        checks,
    };
    println!("{}", serde_json::to_string_pretty(&cal).expect("calibration serializes"));
}
