//! Lyapunov certificates and the bounds built from them: the exponential
//! re-parameterization of a certificate, the annulus comparison bound, the
//! boundedness radius, practical-stability checks over certificate families,
//! and the cascade synthesis pipeline.

mod bounds;
mod cascade;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certcheck::{BallPair, CheckError};
use crate::compfn::{CompFnError, ComparisonFunction};

pub use bounds::{
    check_lyapunov_uspas, comparison_bound, falsify_nonincreasing, safe_radius, transform_lyapunov, CertificateFamily,
    ConditionReport, FalsifierReport, LyapunovUspasReport, PairReport, PilotOptions,
};
pub use cascade::{
    cascade_constants, synthesize_cascade_bound, usas_variant_check, validate_estimate, Audit, CascadeConstants, GammaSurface,
    SubsystemBound, SynthesizedEstimate, Variant,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("Lyapunov transformation failed: {0}")]
    Transform(String),
    #[error("no time t <= {t_max} with subsystem bound at the outer radius below the inner radius")]
    SettlingTime { t_max: f64 },
    #[error("synthesized estimate is degenerate: inner radius {inner} >= outer radius {outer}")]
    Degenerate { inner: f64, outer: f64 },
    #[error(transparent)]
    CompFn(#[from] CompFnError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A candidate Lyapunov function `V(t, x)`.
pub trait LyapunovFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// `(∂V/∂t, ∂V/∂x)`, by central differences unless overridden.
    fn gradient(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        fd_gradient(|t, x| self.value(t, x), t, x)
    }
}

/// Central differences with step `1e-6 (1 + |coordinate|)`.
pub fn fd_gradient<F: Fn(f64, &[f64]) -> f64>(value: F, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let ht = 1e-6 * (1.0 + t.abs());
    let dt = (value(t + ht, x) - value(t - ht, x)) / (2.0 * ht);
    let mut xp = x.to_vec();
    let grad = (0..x.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let up = value(t, &xp);
            xp[i] = x[i] - h;
            let down = value(t, &xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    (dt, grad)
}

/// `V(x) = scale |x|^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub dim: usize,
    pub scale: f64,
}

impl LyapunovFunction for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.scale * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, _t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        (0.0, x.iter().map(|v| 2.0 * self.scale * v).collect())
    }
}

/// A Lyapunov function given by closures; without a gradient closure the
/// finite-difference default is used.
pub struct FnLyapunov<V> {
    dim: usize,
    value: V,
    gradient: Option<Box<dyn Fn(f64, &[f64]) -> (f64, Vec<f64>) + Send + Sync>>,
}

impl<V> FnLyapunov<V>
where
    V: Fn(f64, &[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, value: V) -> Self {
        Self { dim, value, gradient: None }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, &[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    {
        self.gradient = Some(Box::new(g));
        self
    }
}

impl<V> LyapunovFunction for FnLyapunov<V>
where
    V: Fn(f64, &[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.value)(t, x)
    }
    fn gradient(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.gradient {
            Some(g) => g(t, x),
            None => fd_gradient(&self.value, t, x),
        }
    }
}

/// Shared handle to a Lyapunov function; not serialized.
#[derive(Clone)]
pub struct LyapunovHandle(pub Arc<dyn LyapunovFunction>);

impl fmt::Debug for LyapunovHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LyapunovHandle(dim = {})", self.0.dim())
    }
}

/// How the certificate decreases along solutions in its annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Decay {
    /// `V' <= -alpha(|x|)`
    Rate { alpha: ComparisonFunction },
    /// `V' <= -k V`
    Exponential { k: f64 },
}

/// Bounds certified for a Lyapunov function on the annulus
/// `inner <= |x| <= outer`, for the parameter `theta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub lower: ComparisonFunction,
    pub upper: ComparisonFunction,
    pub decay: Decay,
    /// Nondecreasing bound on `|∂V/∂x|` as a function of `|x|`.
    pub grad_bound: ComparisonFunction,
    pub annulus: BallPair,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(skip)]
    pub function: Option<LyapunovHandle>,
}

impl LyapunovCertificate {
    pub fn with_function(mut self, v: Arc<dyn LyapunovFunction>) -> Self {
        self.function = Some(LyapunovHandle(v));
        self
    }

    /// Exponential rate, if the certificate is in exponential form.
    pub fn rate(&self) -> Option<f64> {
        match self.decay {
            Decay::Exponential { k } => Some(k),
            Decay::Rate { .. } => None,
        }
    }

    /// Check `lower <= upper` on sampled radii of the annulus and `k > 0`.
    pub fn validate(&self) -> Result<(), SynthError> {
        if let Decay::Exponential { k } = self.decay {
            if !(k > 0.0) {
                return Err(SynthError::Precondition(format!("decay rate must be positive, got {k}")));
            }
        }
        let lo = self.annulus.inner;
        let hi = if self.annulus.is_global() { 1e3 } else { self.annulus.outer };
        for i in 0..=32 {
            let s = lo + (hi - lo) * i as f64 / 32.0;
            let (l, u) = (self.lower.eval(s)?, self.upper.eval(s)?);
            if l > u * (1.0 + 1e-12) {
                return Err(SynthError::Precondition(format!("lower bound {l} exceeds upper bound {u} at s = {s}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_matches_analytic() {
        let q = Quadratic { dim: 3, scale: 0.5 };
        let f = FnLyapunov::new(3, |_t, x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>());
        let x = [0.3, -1.2, 2.0];
        let (dt, g) = f.gradient(1.0, &x);
        let (_, ga) = q.gradient(1.0, &x);
        assert!(dt.abs() < 1e-8);
        for (a, b) in g.iter().zip(&ga) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn certificate_sandwich_validation() {
        let good = LyapunovCertificate {
            lower: ComparisonFunction::power(0.5, 2.0),
            upper: ComparisonFunction::power(1.0, 2.0),
            decay: Decay::Exponential { k: 1.0 },
            grad_bound: ComparisonFunction::linear(2.0),
            annulus: BallPair::new(0.1, 2.0).unwrap(),
            theta: vec![],
            function: None,
        };
        good.validate().unwrap();
        let bad = LyapunovCertificate { lower: ComparisonFunction::power(2.0, 2.0), ..good.clone() };
        assert!(bad.validate().is_err());
        let bad_rate = LyapunovCertificate { decay: Decay::Exponential { k: 0.0 }, ..good };
        assert!(bad_rate.validate().is_err());
    }
}
