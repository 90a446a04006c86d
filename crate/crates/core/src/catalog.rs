//! Small systems with known certificates, shared by the tests, benches and
//! the scenario runner.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::certcheck::BallPair;
use crate::compfn::{ComparisonFunction, KlBound};
use crate::synth::{Decay, FnLyapunov, GammaSurface, LyapunovCertificate, Quadratic, SubsystemBound, SynthError};
use crate::sysmodel::{compose_cascade, linear_decay, CascadeSystem, ConstantCoupling, FnSystem, StackedCascade, VectorField};

/// `x1' = -x1 + x2`, `x2' = -x2`. From `(0, 1)` the driven state is `t e^{-t}`.
pub fn linear_cascade() -> StackedCascade {
    let f1 = Arc::new(linear_decay(vec![1.0], vec![]));
    let f2 = Arc::new(linear_decay(vec![1.0], vec![]));
    let g = Arc::new(ConstantCoupling(DMatrix::from_element(1, 1, 1.0)));
    compose_cascade(CascadeSystem::new(f1, f2, g)).expect("dimensions match")
}

/// Everything the synthesis pipeline needs for one cascade.
#[derive(Debug, Clone)]
pub struct CascadeInputs {
    pub cert: LyapunovCertificate,
    pub beta2: SubsystemBound,
    /// Bound on the interconnection gain as a function of `|x|`.
    pub coupling: ComparisonFunction,
    pub gamma: GammaSurface,
}

/// Inputs for [`linear_cascade`] on the given ball pairs: `V1 = x1²/2` decays
/// at rate 2 with gradient bound `s`, the coupling is 1, the driving state
/// obeys `|x2(t)| = |x2(0)| e^{-t}`, and `|x|²` does not increase along
/// solutions, which makes the boundedness radius equal to `outer1`.
pub fn linear_cascade_inputs(balls1: BallPair, balls2: BallPair) -> CascadeInputs {
    CascadeInputs {
        cert: LyapunovCertificate {
            lower: ComparisonFunction::power(0.5, 2.0),
            upper: ComparisonFunction::power(0.5, 2.0),
            decay: Decay::Exponential { k: 2.0 },
            grad_bound: ComparisonFunction::identity(),
            annulus: balls1,
            theta: vec![],
            function: None,
        }
        .with_function(Arc::new(Quadratic { dim: 1, scale: 0.5 })),
        beta2: SubsystemBound { beta: KlBound::exponential(1.0, 1.0), balls: balls2 },
        coupling: ComparisonFunction::constant(1.0),
        gamma: GammaSurface::SafeRadius {
            lower: ComparisonFunction::power(1.0, 2.0),
            upper: ComparisonFunction::power(1.0, 2.0),
            delta0: 0.0,
        },
    }
}

/// `x' = -x + c u(t)` on `R²` with `u = (cos(w t + phi), sin(w t + phi))`,
/// parameters `[c, w, phi]`. With `V = |x|²/2`, `V' <= -V + c²/2`.
pub fn forced_decay() -> impl VectorField {
    FnSystem::new(2, 3, |t, x, th, dx| {
        let (c, w, phi) = (th[0], th[1], th[2]);
        let a = w * t + phi;
        dx[0] = -x[0] + c * a.cos();
        dx[1] = -x[1] + c * a.sin();
    })
}

/// Constant `c` of `V' <= -k V + c` for [`forced_decay`] with `V = |x|²/2`, `k = 1`.
pub fn forced_decay_constant(c: f64) -> f64 {
    0.5 * c * c
}

/// `x' = -theta x + 0.1 sin t`.
pub fn scalar_family() -> impl VectorField {
    FnSystem::new(1, 1, |t, x, th, dx| dx[0] = -th[0] * x[0] + 0.1 * t.sin())
}

/// Parameter making `B_inner` attractive for [`scalar_family`]: `1 + 0.2 / inner`.
pub fn scalar_family_theta(balls: BallPair) -> Vec<f64> {
    vec![1.0 + 0.2 / balls.inner]
}

/// `V = x²/2` with `V' <= -x²` on the annulus for the parameter of
/// [`scalar_family_theta`].
pub fn scalar_quadratic_certificate(balls: BallPair) -> Result<LyapunovCertificate, SynthError> {
    Ok(LyapunovCertificate {
        lower: ComparisonFunction::power(0.5, 2.0),
        upper: ComparisonFunction::power(0.5, 2.0),
        decay: Decay::Rate { alpha: ComparisonFunction::power(1.0, 2.0) },
        grad_bound: ComparisonFunction::identity(),
        annulus: balls,
        theta: scalar_family_theta(balls),
        function: None,
    }
    .with_function(Arc::new(Quadratic { dim: 1, scale: 0.5 })))
}

/// `V = 0.75 (1 - e^{-|x|})`, squeezed between `0.5 (1 - e^{-s})` and
/// `1 - e^{-s}`. Both bounds saturate, so the safe radius
/// `upper⁻¹(lower(outer))` stays below `ln 2` however large `outer` is.
pub fn scalar_bounded_certificate(balls: BallPair) -> Result<LyapunovCertificate, SynthError> {
    let saturating = |a: f64| ComparisonFunction::saturating(a, 1.0);
    // On the annulus V' <= -0.75 e^{-|x|} |x| <= -0.75 e^{-outer} |x|.
    let alpha = ComparisonFunction::linear(0.75 * (-balls.outer).exp());
    let v = FnLyapunov::new(1, |_t, x: &[f64]| 0.75 * (1.0 - (-x[0].abs()).exp()));
    Ok(LyapunovCertificate {
        lower: saturating(0.5),
        upper: saturating(1.0),
        decay: Decay::Rate { alpha },
        grad_bound: ComparisonFunction::constant(0.75),
        annulus: balls,
        theta: scalar_family_theta(balls),
        function: None,
    }
    .with_function(Arc::new(v)))
}

/// `x' = x`.
pub fn unstable_scalar() -> impl VectorField {
    linear_decay(vec![-1.0], vec![])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{integrate, IntegrateOptions};

    #[test]
    fn linear_cascade_closed_form() {
        let sys = linear_cascade();
        let traj = integrate(&sys, 0.0, &[0.0, 1.0], &[], 5.0, &IntegrateOptions::default()).unwrap();
        for (t, x) in traj.iter() {
            assert!((x[0] - t * (-t).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn bounded_family_sandwich() {
        let cert = scalar_bounded_certificate(BallPair::new(0.1, 20.0).unwrap()).unwrap();
        let v = cert.function.unwrap().0;
        for s in [0.1, 1.0, 5.0, 19.0] {
            let val = v.value(0.0, &[s]);
            assert!(cert.lower.eval(s).unwrap() <= val && val <= cert.upper.eval(s).unwrap());
        }
    }
}
