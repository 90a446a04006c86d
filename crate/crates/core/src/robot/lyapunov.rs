use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::arm::{Manipulator, Vector};
use super::control::{pack, unpack, MechanicalSubsystem, MotorModel, PidGains};
use super::RobotError;
use crate::certcheck::BallPair;
use crate::compfn::ComparisonFunction;
use crate::synth::{Decay, GammaSurface, LyapunovCertificate, LyapunovFunction};
use crate::sysmodel::VectorField;

/// Energy-like Lyapunov function of the mechanical subsystem in state
/// `(q - q*, q', s)`:
///
/// `½ q'ᵀDq' + ½ k_p'|q̃|² + U(q) - U(q*) - q̃ᵀg(q*) + ½ eps1 k_i |s|² + eps1 q̃ᵀDq' + eps2 sᵀDq'`.
#[derive(Debug, Clone)]
pub struct RobotLyapunov<const N: usize, M> {
    pub arm: M,
    pub target: Vector<N>,
    pub gains: PidGains,
}

impl<const N: usize, M: Manipulator<N> + Clone> RobotLyapunov<N, M> {
    pub fn new(arm: M, target: Vector<N>, gains: PidGains) -> Self {
        Self { arm, target, gains }
    }

    fn subsystem(&self) -> MechanicalSubsystem<N, M> {
        MechanicalSubsystem { arm: self.arm.clone(), target: self.target }
    }

    fn theta(&self) -> [f64; 4] {
        let g = &self.gains;
        [g.k_d, g.kp_reduced(), g.k_i, g.eps1]
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.gains;
        let [q_err, qd, s] = unpack::<N, 3>(x);
        let q = self.target + q_err;
        let d = self.arm.inertia(&q);
        let weighted = q_err * g.eps1 + s * g.eps2;
        let mut dq = q_err * g.kp_reduced() + self.arm.gravity(&q) - self.arm.gravity(&self.target) + d * qd * g.eps1;
        for j in 0..N {
            let dj = self.arm.inertia_partial(&q, j);
            dq[j] += 0.5 * qd.dot(&(dj * qd)) + weighted.dot(&(dj * qd));
        }
        let dqd = d * (qd + q_err * g.eps1 + s * g.eps2);
        let ds = s * (g.eps1 * g.k_i) + d * qd * g.eps2;
        pack(&[&dq, &dqd, &ds])
    }

    /// `V'` along the mechanical subsystem with zero current error.
    pub fn rate(&self, x: &[f64]) -> f64 {
        let grad = self.gradient_vec(x);
        let mut f = vec![0.0; 3 * N];
        self.subsystem().rhs(0.0, x, &self.theta(), &mut f);
        grad.iter().zip(&f).map(|(a, b)| a * b).sum()
    }

    /// Required decrease `-(k_d/2)|q'|² - (eps1 k_p'/2)|q̃|² - (eps2 k_i/2)|s|²`.
    pub fn required_rate(&self, x: &[f64]) -> f64 {
        let g = &self.gains;
        let [q_err, qd, s] = unpack::<N, 3>(x);
        -0.5 * (g.k_d * qd.norm_squared() + g.eps1 * g.kp_reduced() * q_err.norm_squared() + g.eps2 * g.k_i * s.norm_squared())
    }
}

impl<const N: usize, M: Manipulator<N> + Clone> LyapunovFunction for RobotLyapunov<N, M> {
    fn dim(&self) -> usize {
        3 * N
    }

    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        let g = &self.gains;
        let [q_err, qd, s] = unpack::<N, 3>(x);
        let q = self.target + q_err;
        let d = self.arm.inertia(&q);
        let dqd = d * qd;
        0.5 * qd.dot(&dqd) + 0.5 * g.kp_reduced() * q_err.norm_squared() + self.arm.potential(&q)
            - self.arm.potential(&self.target)
            - q_err.dot(&self.arm.gravity(&self.target))
            + 0.5 * g.eps1 * g.k_i * s.norm_squared()
            + g.eps1 * q_err.dot(&dqd)
            + g.eps2 * s.dot(&dqd)
    }

    fn gradient(&self, _t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        (0.0, self.gradient_vec(x))
    }
}

/// Sample `count` points of the ball of radius `radius` in `R^dim`: half
/// uniform in volume, half with log-uniform radius down to `radius * 1e-3`.
pub fn ball_samples(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let r = if k % 2 == 0 { radius * u.powf(1.0 / dim as f64) } else { radius * 1e-3f64.powf(1.0 - u) };
            dir.iter().map(|v| v * r / n).collect()
        })
        .collect()
}

/// Worst sampled violation of the required decrease and of positivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecreaseReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `V' - required`, normalized by `|x|²`.
    pub worst_margin: f64,
    pub worst_state: Vec<f64>,
    /// Smallest `V / |x|²`.
    pub min_ratio: f64,
}

impl DecreaseReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.min_ratio > 0.0
    }
}

/// Falsify `V' <= required` and `V > 0` on `count` samples of the ball.
pub fn falsify_decrease<const N: usize, M: Manipulator<N> + Clone>(
    v: &RobotLyapunov<N, M>,
    radius: f64,
    count: usize,
    seed: u64,
) -> DecreaseReport {
    let mut report = DecreaseReport {
        samples: 0,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        worst_state: vec![],
        min_ratio: f64::INFINITY,
    };
    for x in ball_samples(3 * N, radius, count, seed) {
        let n2: f64 = x.iter().map(|a| a * a).sum();
        if n2 == 0.0 {
            continue;
        }
        report.samples += 1;
        let margin = (v.rate(&x) - v.required_rate(&x)) / n2;
        if !(margin <= 1e-12) {
            report.violations += 1;
        }
        if !(margin <= report.worst_margin) {
            report.worst_margin = margin;
            report.worst_state = x.clone();
        }
        report.min_ratio = report.min_ratio.min(v.value(0.0, &x) / n2);
    }
    report
}

/// Constants read off samples of a ball, with the safety factors already applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCertificate {
    pub radius: f64,
    /// `V >= lower |x|²`
    pub lower: f64,
    /// `V <= upper |x|²`
    pub upper: f64,
    /// `V' <= -k V`
    pub k: f64,
    /// `|∂V/∂x| <= grad |x|`
    pub grad: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Safety factors applied to sampled extremes.
const SHRINK: f64 = 0.9;
const INFLATE: f64 = 1.1;

/// Quadratic sandwich, exponential rate and gradient bound of the robot
/// Lyapunov function on the ball of radius `radius`, by sampling.
pub fn sample_certificate<const N: usize, M: Manipulator<N> + Clone>(
    v: &RobotLyapunov<N, M>,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<SampledCertificate, RobotError> {
    let (mut lo, mut hi, mut k, mut grad) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    let mut used = 0;
    for x in ball_samples(3 * N, radius, count, seed) {
        let n2: f64 = x.iter().map(|a| a * a).sum();
        if n2 == 0.0 {
            continue;
        }
        used += 1;
        let val = v.value(0.0, &x);
        lo = lo.min(val / n2);
        hi = hi.max(val / n2);
        k = k.min(-v.rate(&x) / val);
        let (_, g) = v.gradient(0.0, &x);
        grad = grad.max((g.iter().map(|a| a * a).sum::<f64>() / n2).sqrt());
    }
    if !(lo > 0.0 && k > 0.0) {
        return Err(RobotError::Certificate(format!(
            "sampled bounds are not positive on the ball of radius {radius}: min V/|x|² = {lo}, min -V'/V = {k}"
        )));
    }
    Ok(SampledCertificate {
        radius,
        lower: SHRINK * lo,
        upper: INFLATE * hi,
        k: SHRINK * k,
        grad: INFLATE * grad,
        samples: used,
        seed,
    })
}

impl SampledCertificate {
    /// Exponential-form certificate on `B_radius` with zero inner radius.
    pub fn certificate(&self, theta: Vec<f64>) -> Result<LyapunovCertificate, RobotError> {
        Ok(LyapunovCertificate {
            lower: ComparisonFunction::power(self.lower, 2.0),
            upper: ComparisonFunction::power(self.upper, 2.0),
            decay: Decay::Exponential { k: self.k },
            grad_bound: ComparisonFunction::linear(self.grad),
            annulus: BallPair::new(0.0, self.radius)?,
            theta,
            function: None,
        })
    }

    /// Weight `kappa` of the composite function `V + kappa |i - i*|²` for
    /// which the sampled bounds make it nonincreasing on the ball, given the
    /// coupling gain `coupling` and the current error decay rate `decay`.
    /// It is moved into `[lower, upper]` when that keeps it admissible,
    /// which gives the best sandwich ratio.
    pub fn composite_weight(&self, coupling: f64, decay: f64) -> f64 {
        let needed = (self.grad * coupling).powi(2) / (8.0 * self.k * self.lower * decay);
        if needed <= self.upper {
            needed.max(self.lower)
        } else {
            needed
        }
    }

    /// Radius of initial states whose solutions keep the mechanical state in
    /// `B_radius`, from the composite function with weight `kappa`.
    pub fn gamma_surface(&self, kappa: f64) -> GammaSurface {
        GammaSurface::SafeRadius {
            lower: ComparisonFunction::power(self.lower.min(kappa), 2.0),
            upper: ComparisonFunction::power(self.upper.max(kappa), 2.0),
            delta0: 0.0,
        }
    }
}

/// Upper bound `k_t / d_min` of the coupling of the current error into the
/// mechanical subsystem.
pub fn coupling_gain(motor: &MotorModel, d_min: f64) -> f64 {
    motor.torque_constant / d_min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::arm::TwoLinkArm;
    use crate::synth::fd_gradient;

    fn lyap() -> RobotLyapunov<2, TwoLinkArm> {
        RobotLyapunov::new(TwoLinkArm::default(), Vector::<2>::new(0.5, 0.3), PidGains::from_reduced(40.0, 150.0, 600.0, 0.1))
    }

    #[test]
    fn zero_at_equilibrium() {
        let v = lyap();
        assert_eq!(v.value(0.0, &[0.0; 6]), 0.0);
        assert!(v.gradient(0.0, &[0.0; 6]).1.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let v = lyap();
        for x in ball_samples(6, 2.0, 20, 4) {
            let (_, g) = v.gradient(0.0, &x);
            let (_, fd) = fd_gradient(|t, y| v.value(t, y), 0.0, &x);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rate_matches_derivative_along_a_trajectory() {
        use crate::sysmodel::{integrate, IntegrateOptions, Method};
        let v = lyap();
        let sys = v.subsystem();
        let x0 = [0.3, -0.2, 0.5, 0.1, 0.4, -0.3];
        let h = 1e-4;
        let opts = IntegrateOptions::with_method(Method::Rk45 { rtol: 1e-12, atol: 1e-14 });
        let traj = integrate(&sys, 0.0, &x0, &v.theta(), h, &opts).unwrap();
        // Trapezoid rule for the integral of the rate along the sampled trajectory.
        let rates: Vec<f64> = traj.iter().map(|(_, x)| v.rate(x)).collect();
        let integral: f64 = (1..traj.len()).map(|i| 0.5 * (rates[i] + rates[i - 1]) * (traj.time(i) - traj.time(i - 1))).sum();
        let change = v.value(0.0, traj.last()) - v.value(0.0, &x0);
        assert!((change - integral).abs() <= 1e-6 * change.abs(), "{change} vs {integral}");
    }

    #[test]
    fn composite_weight_is_admissible() {
        let c = SampledCertificate { radius: 1.0, lower: 2.0, upper: 50.0, k: 0.5, grad: 100.0, samples: 1, seed: 0 };
        let kappa = c.composite_weight(1.0, 1000.0);
        assert!(kappa >= 100.0f64.powi(2) / (8.0 * 0.5 * 2.0 * 1000.0));
        assert!((2.0..=50.0).contains(&kappa));
    }
}
