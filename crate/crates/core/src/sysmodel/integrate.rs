use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{InitialCondition, Trajectory, VectorField};

/// States with norm above this are treated as having escaped.
pub const ESCAPE_RADIUS: f64 = 1e8;
/// Number of output intervals over the horizon when no finer step is requested.
const OUTPUT_INTERVALS: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with the given maximum step.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with local error control.
    Rk45 { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { rtol: 1e-8, atol: 1e-10 }
    }
}

/// Stop once the leading `leading` components have norm at most `radius`.
/// Checked at output times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopWhen {
    pub leading: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub method: Method,
    /// Requested output spacing; capped at `horizon / 400`.
    pub output_step: Option<f64>,
    pub escape_radius: f64,
    pub stop: Option<StopWhen>,
    pub max_steps: u64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { method: Method::default(), output_step: None, escape_radius: ESCAPE_RADIUS, stop: None, max_steps: 50_000_000 }
    }
}

impl IntegrateOptions {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum IntegrateError {
    #[error("solution left the escape radius or became non-finite at t = {t}")]
    Divergence { t: f64, state: Vec<f64> },
    #[error("step size underflow at t = {t}; the problem is too stiff for an explicit method")]
    Stiffness { t: f64 },
    #[error("step limit reached at t = {t}")]
    StepLimit { t: f64 },
    #[error("invalid integration request: {0}")]
    Invalid(String),
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn finite_within(x: &[f64], radius: f64) -> bool {
    x.iter().all(|v| v.is_finite()) && norm(x) <= radius
}

/// Integrate `sys` from `(t0, x0)` over `[t0, t0 + horizon]`.
pub fn integrate<S: VectorField + ?Sized>(
    sys: &S,
    t0: f64,
    x0: &[f64],
    theta: &[f64],
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegrateError> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(IntegrateError::Invalid(format!("initial state has length {}, expected {n}", x0.len())));
    }
    if !(horizon > 0.0) || !horizon.is_finite() || !t0.is_finite() {
        return Err(IntegrateError::Invalid(format!("need a finite positive horizon, got {horizon}")));
    }
    match opts.method {
        Method::Rk4 { step } if !(step > 0.0) => {
            return Err(IntegrateError::Invalid(format!("RK4 step must be positive, got {step}")))
        }
        Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
            return Err(IntegrateError::Invalid("RK45 tolerances must be positive".into()))
        }
        _ => {}
    }
    let mut dx = vec![0.0; n];
    sys.rhs(t0, x0, theta, &mut dx);
    if !dx.iter().all(|v| v.is_finite()) || !x0.iter().all(|v| v.is_finite()) {
        return Err(IntegrateError::Divergence { t: t0, state: x0.to_vec() });
    }

    let cap = horizon / OUTPUT_INTERVALS;
    let requested = opts.output_step.unwrap_or(cap).min(cap);
    let intervals = (horizon / requested).ceil().max(1.0) as usize;
    let h_out = horizon / intervals as f64;

    let mut tr = Trajectory {
        t0,
        dim: n,
        elapsed: Vec::with_capacity(intervals + 1),
        states: Vec::with_capacity((intervals + 1) * n),
        theta: theta.to_vec(),
        method: opts.method,
        stopped_early: false,
    };
    tr.elapsed.push(0.0);
    tr.states.extend_from_slice(x0);

    let stop_hit = |x: &[f64]| opts.stop.is_some_and(|s| norm(&x[..s.leading.min(n)]) <= s.radius);
    if stop_hit(x0) {
        tr.stopped_early = true;
        return Ok(tr);
    }

    let mut stepper: Box<dyn Stepper + '_> = match opts.method {
        Method::Rk4 { step } => Box::new(Rk4 { sys, theta, step, k: vec![vec![0.0; n]; 4], tmp: vec![0.0; n] }),
        Method::Rk45 { rtol, atol } => Box::new(Dopri::new(sys, theta, rtol, atol, h_out, t0, x0, dx)),
    };
    let mut x = x0.to_vec();
    let mut steps = 0u64;
    for k in 1..=intervals {
        let from = (k - 1) as f64 * h_out;
        let to = if k == intervals { horizon } else { k as f64 * h_out };
        stepper.advance(t0, from, to, &mut x, opts, &mut steps)?;
        tr.elapsed.push(to);
        tr.states.extend_from_slice(&x);
        if stop_hit(&x) {
            tr.stopped_early = true;
            break;
        }
    }
    Ok(tr)
}

trait Stepper {
    /// Advance `x` from elapsed time `from` to `to` (offsets from `t0`).
    fn advance(
        &mut self,
        t0: f64,
        from: f64,
        to: f64,
        x: &mut [f64],
        opts: &IntegrateOptions,
        steps: &mut u64,
    ) -> Result<(), IntegrateError>;
}

struct Rk4<'a, S: ?Sized> {
    sys: &'a S,
    theta: &'a [f64],
    step: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl<S: VectorField + ?Sized> Stepper for Rk4<'_, S> {
    fn advance(
        &mut self,
        t0: f64,
        from: f64,
        to: f64,
        x: &mut [f64],
        opts: &IntegrateOptions,
        steps: &mut u64,
    ) -> Result<(), IntegrateError> {
        let n = x.len();
        let sub = ((to - from) / self.step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (to - from) / sub as f64;
        for j in 0..sub {
            let t = t0 + from + j as f64 * h;
            let [k1, k2, k3, k4] = &mut self.k[..] else { unreachable!() };
            self.sys.rhs(t, x, self.theta, k1);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            self.sys.rhs(t + 0.5 * h, &self.tmp, self.theta, k2);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            self.sys.rhs(t + 0.5 * h, &self.tmp, self.theta, k3);
            for i in 0..n {
                self.tmp[i] = x[i] + h * k3[i];
            }
            self.sys.rhs(t + h, &self.tmp, self.theta, k4);
            let prev = x.to_vec();
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            *steps += 1;
            if !finite_within(x, opts.escape_radius) {
                return Err(IntegrateError::Divergence { t: t0 + from + j as f64 * h, state: prev });
            }
            if *steps > opts.max_steps {
                return Err(IntegrateError::StepLimit { t: t + h });
            }
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

struct Dopri<'a, S: ?Sized> {
    sys: &'a S,
    theta: &'a [f64],
    rtol: f64,
    atol: f64,
    h: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a, S: VectorField + ?Sized> Dopri<'a, S> {
    #[allow(clippy::too_many_arguments)]
    fn new(sys: &'a S, theta: &'a [f64], rtol: f64, atol: f64, h_out: f64, _t0: f64, x0: &[f64], f0: Vec<f64>) -> Self {
        let n = x0.len();
        let sc: Vec<f64> = x0.iter().map(|v| atol + rtol * v.abs()).collect();
        let d0 = (x0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let mut k = vec![vec![0.0; n]; 7];
        k[0] = f0;
        Self { sys, theta, rtol, atol, h: h0.min(h_out), k, tmp: vec![0.0; n], y_new: vec![0.0; n] }
    }
}

impl<S: VectorField + ?Sized> Stepper for Dopri<'_, S> {
    fn advance(
        &mut self,
        t0: f64,
        from: f64,
        to: f64,
        x: &mut [f64],
        opts: &IntegrateOptions,
        steps: &mut u64,
    ) -> Result<(), IntegrateError> {
        let n = x.len();
        let mut tau = from;
        while tau < to {
            let remaining = to - tau;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let t = t0 + tau;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * self.k[j][i];
                    }
                    self.tmp[i] = x[i] + h * acc;
                }
                if s == 6 {
                    self.y_new.copy_from_slice(&self.tmp);
                }
                self.sys.rhs(t + C[s] * h, &self.tmp, self.theta, &mut self.k[s]);
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * self.k[s][i];
                }
                let sc = self.atol + self.rtol * x[i].abs().max(self.y_new[i].abs());
                err += (h * e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            *steps += 1;
            if *steps > opts.max_steps {
                return Err(IntegrateError::StepLimit { t });
            }
            if !err.is_finite() {
                if h < 1e-12 * t.abs().max(1.0) {
                    return Err(IntegrateError::Divergence { t, state: x.to_vec() });
                }
                self.h = 0.2 * h;
                continue;
            } else if err <= 1.0 {
                if !finite_within(&self.y_new, opts.escape_radius) {
                    return Err(IntegrateError::Divergence { t, state: x.to_vec() });
                }
                x.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                tau = if last { to } else { tau + h };
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // A step shortened to hit an output time says nothing about the
                // natural step size, so only grow from it.
                self.h = if last { self.h.max(h * fac) } else { h * fac };
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if self.h < 16.0 * f64::EPSILON * (t0 + tau).abs().max(1.0) {
                return Err(IntegrateError::Stiffness { t: t0 + tau });
            }
        }
        Ok(())
    }
}

/// Integrate every initial condition, in parallel, keeping input order.
pub fn ensemble<S: VectorField + ?Sized>(
    sys: &S,
    ics: &[InitialCondition],
    theta: &[f64],
    horizon: f64,
    opts: &IntegrateOptions,
) -> Vec<Result<Trajectory, IntegrateError>> {
    ics.par_iter().map(|ic| integrate(sys, ic.t0, &ic.x0, theta, horizon, opts)).collect()
}
