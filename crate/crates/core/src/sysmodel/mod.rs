//! Parameterized vector fields, cascades, integration and ensembles.

mod integrate;
mod sampling;
mod trajectory;

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

pub use integrate::{ensemble, integrate, IntegrateError, IntegrateOptions, Method, StopWhen, ESCAPE_RADIUS};
pub use sampling::{sphere_directions, InitialCondition, InitialConditionSampler, SamplerKind, SamplingPlan};
pub use trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },
}

/// `x' = f(t, x, theta)` on `R^n` with parameters in `R^m`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    /// Write `f(t, x, theta)` into `dx`.
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]);
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

impl<T: VectorField + ?Sized> VectorField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        (**self).rhs(t, x, theta, dx)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
}

impl<T: VectorField + ?Sized> VectorField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        (**self).rhs(t, x, theta, dx)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
}

/// A vector field given by a closure.
pub struct FnSystem<F> {
    dim: usize,
    param_dim: usize,
    f: F,
    lipschitz: Option<f64>,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, param_dim: usize, f: F) -> Self {
        Self { dim, param_dim, f, lipschitz: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl<F> VectorField for FnSystem<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, theta, dx)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// The coupling term `g(t, x, theta)` of a cascade, an `n1 x n2` matrix.
pub trait Interconnection: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn matrix(&self, t: f64, x: &[f64], theta: &[f64]) -> DMatrix<f64>;

    /// Add `g(t, x, theta) x2` to `out`.
    fn apply(&self, t: f64, x: &[f64], theta: &[f64], x2: &[f64], out: &mut [f64]) {
        let g = self.matrix(t, x, theta);
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..x2.len()).map(|j| g[(i, j)] * x2[j]).sum::<f64>();
        }
    }
}

/// `g ≡ 0`.
#[derive(Debug, Clone)]
pub struct NoCoupling {
    pub rows: usize,
    pub cols: usize,
}

impl Interconnection for NoCoupling {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn matrix(&self, _t: f64, _x: &[f64], _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.rows, self.cols)
    }
    fn apply(&self, _t: f64, _x: &[f64], _theta: &[f64], _x2: &[f64], _out: &mut [f64]) {}
}

/// A constant coupling matrix.
#[derive(Debug, Clone)]
pub struct ConstantCoupling(pub DMatrix<f64>);

impl Interconnection for ConstantCoupling {
    fn rows(&self) -> usize {
        self.0.nrows()
    }
    fn cols(&self) -> usize {
        self.0.ncols()
    }
    fn matrix(&self, _t: f64, _x: &[f64], _theta: &[f64]) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// `x1' = f1(t, x1, theta1) + g(t, x, theta) x2`, `x2' = f2(t, x2, theta2)`.
#[derive(Clone)]
pub struct CascadeSystem {
    pub f1: Arc<dyn VectorField>,
    pub f2: Arc<dyn VectorField>,
    pub g: Arc<dyn Interconnection>,
}

impl CascadeSystem {
    pub fn new(f1: Arc<dyn VectorField>, f2: Arc<dyn VectorField>, g: Arc<dyn Interconnection>) -> Self {
        Self { f1, f2, g }
    }

    pub fn n1(&self) -> usize {
        self.f1.dim()
    }

    pub fn n2(&self) -> usize {
        self.f2.dim()
    }

    /// Concatenate the two subsystem parameter vectors.
    pub fn join_theta(theta1: &[f64], theta2: &[f64]) -> Vec<f64> {
        theta1.iter().chain(theta2).copied().collect()
    }
}

/// The stacked vector field of a cascade, with `theta = (theta1, theta2)`.
#[derive(Clone)]
pub struct StackedCascade {
    cascade: CascadeSystem,
}

impl StackedCascade {
    pub fn cascade(&self) -> &CascadeSystem {
        &self.cascade
    }
}

pub fn compose_cascade(c: CascadeSystem) -> Result<StackedCascade, ModelError> {
    if c.g.rows() != c.f1.dim() || c.g.cols() != c.f2.dim() {
        return Err(ModelError::Dimension(format!(
            "interconnection is {}x{} but subsystems have dimensions {} and {}",
            c.g.rows(),
            c.g.cols(),
            c.f1.dim(),
            c.f2.dim()
        )));
    }
    if c.f1.dim() == 0 || c.f2.dim() == 0 {
        return Err(ModelError::Dimension("subsystems must have positive dimension".into()));
    }
    Ok(StackedCascade { cascade: c })
}

impl VectorField for StackedCascade {
    fn dim(&self) -> usize {
        self.cascade.n1() + self.cascade.n2()
    }

    fn param_dim(&self) -> usize {
        self.cascade.f1.param_dim() + self.cascade.f2.param_dim()
    }

    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let n1 = self.cascade.n1();
        let m1 = self.cascade.f1.param_dim();
        let (x1, x2) = x.split_at(n1);
        let (th1, th2) = theta.split_at(m1.min(theta.len()));
        let (d1, d2) = dx.split_at_mut(n1);
        self.cascade.f1.rhs(t, x1, th1, d1);
        self.cascade.g.apply(t, x, theta, x2, d1);
        self.cascade.f2.rhs(t, x2, th2, d2);
    }
}

/// `x' = -diag(rate) x + offset`, a decoupled linear family used throughout
/// the tests and scenarios. Parameters are unused.
pub fn linear_decay(rates: Vec<f64>, offset: Vec<f64>) -> impl VectorField {
    let n = rates.len();
    FnSystem::new(n, 0, move |_t, x, _th, dx| {
        for i in 0..n {
            dx[i] = -rates[i] * x[i] + offset.get(i).copied().unwrap_or(0.0);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_cascade(coupling: f64) -> StackedCascade {
        let f1 = Arc::new(linear_decay(vec![1.0], vec![]));
        let f2 = Arc::new(linear_decay(vec![1.0], vec![]));
        let g = Arc::new(ConstantCoupling(DMatrix::from_element(1, 1, coupling)));
        compose_cascade(CascadeSystem::new(f1, f2, g)).unwrap()
    }

    #[test]
    fn stacked_rhs() {
        let s = linear_cascade(1.0);
        let mut dx = [0.0; 2];
        s.rhs(0.0, &[2.0, 3.0], &[], &mut dx);
        assert_eq!(dx, [1.0, -3.0]);
    }

    #[test]
    fn x2_block_ignores_x1() {
        let s = linear_cascade(1.0);
        let h = 1e-6;
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        s.rhs(0.0, &[1.0, 0.5], &[], &mut a);
        s.rhs(0.0, &[1.0 + h, 0.5], &[], &mut b);
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f1 = Arc::new(linear_decay(vec![1.0, 1.0], vec![]));
        let f2 = Arc::new(linear_decay(vec![1.0], vec![]));
        let g = Arc::new(ConstantCoupling(DMatrix::zeros(1, 1)));
        assert!(matches!(compose_cascade(CascadeSystem::new(f1, f2, g)), Err(ModelError::Dimension(_))));
    }

    #[test]
    fn zero_coupling_is_block_diagonal() {
        let f1 = Arc::new(linear_decay(vec![2.0], vec![]));
        let f2 = Arc::new(linear_decay(vec![3.0], vec![]));
        let s = compose_cascade(CascadeSystem::new(f1, f2, Arc::new(NoCoupling { rows: 1, cols: 1 }))).unwrap();
        let mut dx = [0.0; 2];
        s.rhs(0.0, &[1.0, 1.0], &[], &mut dx);
        assert_eq!(dx, [-2.0, -3.0]);
    }
}
