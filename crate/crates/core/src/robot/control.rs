use std::marker::PhantomData;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::arm::{Manipulator, Vector};
use super::RobotError;
use crate::sysmodel::{compose_cascade, CascadeSystem, Interconnection, StackedCascade, VectorField};

/// Armature-controlled DC motor `L i' + R i + k_b q' = v`, torque `k_t i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorModel {
    pub inductance: f64,
    pub resistance: f64,
    pub back_emf: f64,
    pub torque_constant: f64,
}

impl Default for MotorModel {
    fn default() -> Self {
        Self { inductance: 0.01, resistance: 1.0, back_emf: 0.1, torque_constant: 1.0 }
    }
}

impl MotorModel {
    /// Decay rate `(R + R') / L` of the current error under the voltage law.
    pub fn current_decay(&self, extra_resistance: f64) -> f64 {
        (self.resistance + extra_resistance) / self.inductance
    }
}

/// Scalar PID gains shared by all joints, with the two small weights of the
/// cross terms of the Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_d: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl PidGains {
    /// Build from the reduced proportional gain `k_p' = k_p - k_i / eps1`.
    pub fn from_reduced(k_d: f64, kp_reduced: f64, k_i: f64, eps1: f64) -> Self {
        Self { k_d, k_p: kp_reduced + k_i / eps1, k_i, eps1, eps2: 0.25 * eps1 }
    }

    pub fn kp_reduced(&self) -> f64 {
        self.k_p - self.k_i / self.eps1
    }

    /// `[k_d, k_p, k_i, R']` for the direct closed loop.
    pub fn direct_theta(&self, extra_resistance: f64) -> Vec<f64> {
        vec![self.k_d, self.k_p, self.k_i, extra_resistance]
    }

    /// `[k_d, k_p', k_i, eps1, R']` for the cascade form.
    pub fn cascade_theta(&self, extra_resistance: f64) -> Vec<f64> {
        vec![self.k_d, self.kp_reduced(), self.k_i, self.eps1, extra_resistance]
    }

    /// All gains and weights positive, including `k_p'`.
    pub fn validate(&self) -> Result<(), RobotError> {
        let ok = [self.k_d, self.k_i, self.eps1, self.eps2, self.kp_reduced()].iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(RobotError::Gains(format!("{self:?}")))
        }
    }
}

/// `a + b * radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
}

impl Affine {
    pub fn at(&self, radius: f64) -> f64 {
        self.a + self.b * radius
    }
}

/// Gains as affine functions of the radius of the ball to be stabilized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub k_d: Affine,
    pub kp_reduced: Affine,
    pub k_i: Affine,
}

/// `min(0.1, 1 / (4 radius))`.
pub fn cross_weight(radius: f64) -> f64 {
    if radius > 0.0 {
        0.1f64.min(0.25 / radius)
    } else {
        0.1
    }
}

impl GainSchedule {
    pub fn gains(&self, radius: f64) -> PidGains {
        PidGains::from_reduced(self.k_d.at(radius), self.kp_reduced.at(radius), self.k_i.at(radius), cross_weight(radius))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |x: Affine| Affine { a: x.a * factor, b: x.b * factor };
        Self { k_d: s(self.k_d), kp_reduced: s(self.kp_reduced), k_i: s(self.k_i) }
    }
}

/// Controller's knowledge of gravity at the set point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GravityEstimate {
    #[default]
    Exact,
    /// The true value with one joint's entry multiplied by `factor`.
    JointBias { joint: usize, factor: f64 },
}

impl GravityEstimate {
    pub fn apply<const N: usize>(&self, exact: Vector<N>) -> Vector<N> {
        match *self {
            GravityEstimate::Exact => exact,
            GravityEstimate::JointBias { joint, factor } => {
                let mut g = exact;
                if joint < N {
                    g[joint] *= factor;
                }
                g
            }
        }
    }
}

/// PID torque `u* = -k_p (q - q*) - k_d q' + nu`.
pub fn pid_torque<const N: usize>(q_err: &Vector<N>, qd: &Vector<N>, nu: &Vector<N>, k_p: f64, k_d: f64) -> Vector<N> {
    nu - q_err * k_p - qd * k_d
}

/// Integrator state derivative `nu' = -k_i (q - q*)`.
pub fn pid_integrator_rhs<const N: usize>(q_err: &Vector<N>, k_i: f64) -> Vector<N> {
    -q_err * k_i
}

/// Voltage that drives the current error `i - i*` to zero at rate
/// `(R + R') / L`: `v = -R' (i - i*) + R i* + k_b q' + L di*/dt`.
pub fn voltage_law<const N: usize>(
    motor: &MotorModel,
    extra_resistance: f64,
    current: &Vector<N>,
    current_ref: &Vector<N>,
    current_ref_rate: &Vector<N>,
    qd: &Vector<N>,
) -> Vector<N> {
    -(current - current_ref) * extra_resistance
        + current_ref * motor.resistance
        + qd * motor.back_emf
        + current_ref_rate * motor.inductance
}

/// Arm, motors and set point shared by both closed-loop forms.
#[derive(Debug, Clone)]
pub struct Plant<const N: usize, M> {
    pub arm: M,
    pub motor: MotorModel,
    pub target: Vector<N>,
    pub estimate: GravityEstimate,
}

impl<const N: usize, M: Manipulator<N>> Plant<N, M> {
    pub fn new(arm: M, motor: MotorModel, target: Vector<N>) -> Self {
        Self { arm, motor, target, estimate: GravityEstimate::Exact }
    }

    pub fn with_estimate(mut self, estimate: GravityEstimate) -> Self {
        self.estimate = estimate;
        self
    }

    pub fn target_gravity(&self) -> Vector<N> {
        self.arm.gravity(&self.target)
    }

    /// Initial integrator state `nu(0)`, the controller's gravity estimate at the set point.
    pub fn integrator_start(&self) -> Vector<N> {
        self.estimate.apply(self.target_gravity())
    }

    /// Direct-loop state `(q, q', nu, i)` at rest at `q0` with the integrator
    /// started from the gravity estimate and the current at its reference.
    pub fn direct_initial(&self, q0: &Vector<N>, qd0: &Vector<N>, gains: &PidGains) -> Vec<f64> {
        let nu = self.integrator_start();
        let i = self.current_reference(&(q0 - self.target), qd0, &nu, gains);
        pack(&[q0, qd0, &nu, &i])
    }

    /// `i* = u* / k_t`.
    pub fn current_reference(&self, q_err: &Vector<N>, qd: &Vector<N>, nu: &Vector<N>, gains: &PidGains) -> Vector<N> {
        pid_torque(q_err, qd, nu, gains.k_p, gains.k_d) / self.motor.torque_constant
    }

    /// Cascade state `(q - q*, q', s, i - i*)` from a direct-loop state.
    pub fn to_cascade(&self, x: &[f64], gains: &PidGains) -> Vec<f64> {
        let [q, qd, nu, i] = unpack::<N, 4>(x);
        let q_err = q - self.target;
        let s = q_err / gains.eps1 + (self.target_gravity() - nu) / gains.k_i;
        let i_err = i - self.current_reference(&q_err, &qd, &nu, gains);
        pack(&[&q_err, &qd, &s, &i_err])
    }

    /// Direct-loop state `(q, q', nu, i)` from a cascade state.
    pub fn to_direct(&self, z: &[f64], gains: &PidGains) -> Vec<f64> {
        let [q_err, qd, s, i_err] = unpack::<N, 4>(z);
        let nu = self.target_gravity() - (s - q_err / gains.eps1) * gains.k_i;
        let i = self.current_reference(&q_err, &qd, &nu, gains) + i_err;
        pack(&[&(self.target + q_err), &qd, &nu, &i])
    }
}

pub(crate) fn pack<const N: usize>(blocks: &[&Vector<N>]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

pub(crate) fn unpack<const N: usize, const K: usize>(x: &[f64]) -> [Vector<N>; K] {
    std::array::from_fn(|k| Vector::<N>::from_column_slice(&x[k * N..(k + 1) * N]))
}

/// Arm, motors, PID and voltage law with state `(q, q', nu, i)` and
/// parameters `[k_d, k_p, k_i, R']`.
#[derive(Debug, Clone)]
pub struct DirectLoop<const N: usize, M> {
    pub plant: Plant<N, M>,
}

impl<const N: usize, M: Manipulator<N>> DirectLoop<N, M> {
    pub fn new(plant: Plant<N, M>) -> Self {
        Self { plant }
    }

    /// `(q'', nu', di/dt, v)` at state `x`.
    fn evaluate(&self, x: &[f64], theta: &[f64]) -> [Vector<N>; 4] {
        let p = &self.plant;
        let [q, qd, nu, i] = unpack::<N, 4>(x);
        let (k_d, k_p, k_i, r_extra) = (theta[0], theta[1], theta[2], theta[3]);
        let kt = p.motor.torque_constant;
        let q_err = q - p.target;
        let qdd = p.arm.acceleration(&q, &qd, &(i * kt)).unwrap_or_else(|_| Vector::<N>::repeat(f64::NAN));
        let nu_rate = pid_integrator_rhs(&q_err, k_i);
        let i_ref = pid_torque(&q_err, &qd, &nu, k_p, k_d) / kt;
        let i_ref_rate = (nu_rate - qd * k_p - qdd * k_d) / kt;
        let v = voltage_law(&p.motor, r_extra, &i, &i_ref, &i_ref_rate, &qd);
        let di = (v - i * p.motor.resistance - qd * p.motor.back_emf) / p.motor.inductance;
        [qdd, nu_rate, di, v]
    }

    /// Motor voltages commanded at state `x`.
    pub fn voltage(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        self.evaluate(x, theta)[3].iter().copied().collect()
    }

    /// `i* = u* / k_t` at state `x`.
    pub fn current_reference(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let [q, qd, nu, _] = unpack::<N, 4>(x);
        let i_ref = pid_torque(&(q - self.plant.target), &qd, &nu, theta[1], theta[0]) / self.plant.motor.torque_constant;
        i_ref.iter().copied().collect()
    }

    /// `di*/dt` along the closed loop at state `x`, by the chain rule.
    pub fn current_reference_rate(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let [qdd, nu_rate, ..] = self.evaluate(x, theta);
        let qd = Vector::<N>::from_column_slice(&x[N..2 * N]);
        let rate = (nu_rate - qd * theta[1] - qdd * theta[0]) / self.plant.motor.torque_constant;
        rate.iter().copied().collect()
    }
}

impl<const N: usize, M: Manipulator<N>> VectorField for DirectLoop<N, M> {
    fn dim(&self) -> usize {
        4 * N
    }
    fn param_dim(&self) -> usize {
        4
    }
    fn rhs(&self, _t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let [qdd, nu_rate, di, _] = self.evaluate(x, theta);
        dx[..N].copy_from_slice(&x[N..2 * N]);
        dx[N..].copy_from_slice(&pack(&[&qdd, &nu_rate, &di]));
    }
}

/// Mechanical part of the cascade with state `(q - q*, q', s)` and parameters
/// `[k_d, k_p', k_i, eps1]`, with the current error set to zero.
#[derive(Debug, Clone)]
pub struct MechanicalSubsystem<const N: usize, M> {
    pub arm: M,
    pub target: Vector<N>,
}

impl<const N: usize, M: Manipulator<N>> MechanicalSubsystem<N, M> {
    /// `D q''` without the motor current term.
    pub fn generalized_force(&self, q_err: &Vector<N>, qd: &Vector<N>, s: &Vector<N>, theta: &[f64]) -> Vector<N> {
        let (k_d, kp_reduced, k_i) = (theta[0], theta[1], theta[2]);
        let q = self.target + q_err;
        -self.arm.coriolis(&q, qd) * qd
            - (self.arm.gravity(&q) - self.arm.gravity(&self.target))
            - q_err * kp_reduced
            - qd * k_d
            - s * k_i
    }
}

impl<const N: usize, M: Manipulator<N>> VectorField for MechanicalSubsystem<N, M> {
    fn dim(&self) -> usize {
        3 * N
    }
    fn param_dim(&self) -> usize {
        4
    }
    fn rhs(&self, _t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let [q_err, qd, s] = unpack::<N, 3>(x);
        let force = self.generalized_force(&q_err, &qd, &s, theta);
        let d = self.arm.inertia(&(self.target + q_err));
        let qdd = d.cholesky().map(|c| c.solve(&force)).unwrap_or_else(|| Vector::<N>::repeat(f64::NAN));
        let s_rate = q_err + qd / theta[3];
        dx.copy_from_slice(&pack(&[&qd, &qdd, &s_rate]));
    }
}

/// Current error `i - i*` under the voltage law, parameter `[R']`.
#[derive(Debug, Clone)]
pub struct CurrentError<const N: usize> {
    pub motor: MotorModel,
}

impl<const N: usize> VectorField for CurrentError<N> {
    fn dim(&self) -> usize {
        N
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let rate = self.motor.current_decay(theta[0]);
        for (d, v) in dx.iter_mut().zip(x) {
            *d = -rate * v;
        }
    }
}

/// Current error entering the acceleration channel as `D⁻¹ k_t (i - i*)`.
pub struct CurrentCoupling<const N: usize, M> {
    pub arm: M,
    pub target: Vector<N>,
    pub torque_constant: f64,
    _n: PhantomData<[(); N]>,
}

impl<const N: usize, M: Manipulator<N>> CurrentCoupling<N, M> {
    pub fn new(arm: M, target: Vector<N>, torque_constant: f64) -> Self {
        Self { arm, target, torque_constant, _n: PhantomData }
    }

    fn inverse_inertia(&self, x: &[f64]) -> nalgebra::SMatrix<f64, N, N> {
        let q = self.target + Vector::<N>::from_column_slice(&x[..N]);
        self.arm.inertia(&q).try_inverse().unwrap_or_else(|| nalgebra::SMatrix::<f64, N, N>::repeat(f64::NAN))
    }
}

impl<const N: usize, M: Manipulator<N>> Interconnection for CurrentCoupling<N, M> {
    fn rows(&self) -> usize {
        3 * N
    }
    fn cols(&self) -> usize {
        N
    }
    fn matrix(&self, _t: f64, x: &[f64], _theta: &[f64]) -> DMatrix<f64> {
        let block = self.inverse_inertia(x) * self.torque_constant;
        let mut g = DMatrix::zeros(3 * N, N);
        g.view_mut((N, 0), (N, N)).copy_from(&block);
        g
    }
    fn apply(&self, _t: f64, x: &[f64], _theta: &[f64], x2: &[f64], out: &mut [f64]) {
        let q = self.target + Vector::<N>::from_column_slice(&x[..N]);
        let torque = Vector::<N>::from_column_slice(x2) * self.torque_constant;
        let acc = self.arm.inertia(&q).cholesky().map(|c| c.solve(&torque)).unwrap_or_else(|| Vector::<N>::repeat(f64::NAN));
        for (o, a) in out[N..2 * N].iter_mut().zip(acc.iter()) {
            *o += a;
        }
    }
}

/// The closed loop in cascade form: mechanical subsystem driven by the
/// current error, parameters `[k_d, k_p', k_i, eps1, R']`.
pub fn closed_loop_cascade<const N: usize, M>(plant: &Plant<N, M>) -> Result<StackedCascade, RobotError>
where
    M: Manipulator<N> + Clone + 'static,
{
    let f1 = Arc::new(MechanicalSubsystem { arm: plant.arm.clone(), target: plant.target });
    let f2 = Arc::new(CurrentError::<N> { motor: plant.motor });
    let g = Arc::new(CurrentCoupling::new(plant.arm.clone(), plant.target, plant.motor.torque_constant));
    Ok(compose_cascade(CascadeSystem::new(f1, f2, g))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::arm::TwoLinkArm;
    use crate::sysmodel::{integrate, IntegrateOptions, Method};

    fn plant() -> Plant<2, TwoLinkArm> {
        Plant::new(TwoLinkArm::default(), MotorModel::default(), Vector::<2>::new(0.5, 0.3))
    }

    fn gains() -> PidGains {
        PidGains::from_reduced(40.0, 120.0, 200.0, 0.1)
    }

    #[test]
    fn coordinate_round_trip() {
        let p = plant();
        let g = gains();
        let x = vec![0.1, -0.4, 1.0, 2.0, 3.0, -1.0, 0.7, 0.2];
        let back = p.to_direct(&p.to_cascade(&x, &g), &g);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_is_at_rest_in_both_forms() {
        let p = plant();
        let g = gains();
        let z = vec![0.0; 8];
        let x = p.to_direct(&z, &g);
        let direct = DirectLoop::new(p.clone());
        let mut dx = vec![0.0; 8];
        direct.rhs(0.0, &x, &g.direct_theta(9.0), &mut dx);
        assert!(dx.iter().all(|v| v.abs() < 1e-12), "{dx:?}");
        let cascade = closed_loop_cascade(&p).unwrap();
        cascade.rhs(0.0, &z, &g.cascade_theta(9.0), &mut dx);
        assert!(dx.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vector_fields_agree_under_the_change_of_coordinates() {
        let p = plant();
        let g = gains();
        let direct = DirectLoop::new(p.clone());
        let cascade = closed_loop_cascade(&p).unwrap();
        let z = vec![0.2, -0.3, 0.5, 0.1, -0.4, 0.6, 0.05, -0.02];
        let x = p.to_direct(&z, &g);
        let mut dz = vec![0.0; 8];
        cascade.rhs(0.0, &z, &g.cascade_theta(9.0), &mut dz);
        let mut dx = vec![0.0; 8];
        direct.rhs(0.0, &x, &g.direct_theta(9.0), &mut dx);
        // Push the direct derivative through the linear part of the map and
        // compare with a finite difference of the transformed state.
        let h = 1e-7;
        let xp: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a - h * b).collect();
        let (zp, zm) = (p.to_cascade(&xp, &g), p.to_cascade(&xm, &g));
        for k in 0..8 {
            let fd = (zp[k] - zm[k]) / (2.0 * h);
            assert!((fd - dz[k]).abs() <= 1e-5 * (1.0 + dz[k].abs()), "component {k}: {fd} vs {}", dz[k]);
        }
    }

    #[test]
    fn current_error_decays_at_the_designed_rate() {
        let p = plant();
        let g = gains();
        let direct = DirectLoop::new(p.clone());
        let mut x = p.direct_initial(&Vector::<2>::new(0.2, 0.1), &Vector::<2>::zeros(), &g);
        x[6] += 0.5;
        let opts = IntegrateOptions::with_method(Method::Rk45 { rtol: 1e-10, atol: 1e-12 });
        let traj = integrate(&direct, 0.0, &x, &g.direct_theta(9.0), 0.005, &opts).unwrap();
        let z = p.to_cascade(traj.last(), &g);
        let expected = 0.5 * (-1000.0f64 * 0.005).exp();
        assert!((z[6] - expected).abs() < 1e-7, "{} vs {expected}", z[6]);
    }

    #[test]
    fn gravity_bias_only_touches_one_joint() {
        let e = GravityEstimate::JointBias { joint: 1, factor: 1.1 };
        let g = e.apply(Vector::<2>::new(2.0, 3.0));
        assert_eq!(g, Vector::<2>::new(2.0, 3.3000000000000003));
    }

    #[test]
    fn schedule_uses_the_cross_weight_rule() {
        let s = GainSchedule {
            k_d: Affine { a: 10.0, b: 1.0 },
            kp_reduced: Affine { a: 50.0, b: 0.0 },
            k_i: Affine { a: 100.0, b: 2.0 },
        };
        let g = s.gains(10.0);
        assert_eq!(g.eps1, 0.025);
        assert_eq!(g.eps2, 0.00625);
        assert!((g.kp_reduced() - 50.0).abs() < 1e-9);
        assert_eq!(s.gains(1.0).eps1, 0.1);
    }
}
