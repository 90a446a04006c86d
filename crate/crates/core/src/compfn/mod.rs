//! Comparison functions: class K, K∞ and L scalar functions together with the
//! two-argument KL bounds built from them.
//!
//! A [`ComparisonFunction`] is an immutable expression tree. Leaves are closed
//! forms (linear, power, saturating exponential, exponential decay) or
//! monotone breakpoint grids; interior nodes compose, invert, add, multiply or
//! scale other functions. Evaluation is exact up to floating point for every
//! node except [`Repr::Inverse`] and the generic bisection fallback of
//! [`ComparisonFunction::invert`], both of which run to [`TOL_INV`].

mod envelope;
mod integral;
mod kl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use envelope::{fit_k_envelope, fit_l_envelope, kl_from_us_ua};
pub use integral::{adaptive_simpson, ExpIntegral};
pub use kl::{ComparisonDecay, KlBound, KlGrid};

/// Relative tolerance of numeric inversion.
pub const TOL_INV: f64 = 1e-10;
/// Iteration cap for every bisection in this module.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Tie-break increment (scaled by `1 + s`) that keeps fitted grids strictly increasing.
pub const EPS_STRICT: f64 = 1e-12;
/// Slope given to envelopes that would otherwise be identically zero.
pub const EPS_REG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompFnError {
    #[error("argument {0} is negative or not a number")]
    NegativeArgument(f64),
    #[error("argument {arg} is outside the domain [0, {max}] and extrapolation is disabled")]
    OutOfDomain { arg: f64, max: f64 },
    #[error("value {value} is outside the range of the function")]
    Range { value: f64 },
    #[error("kind error: {0}")]
    Kind(String),
    #[error("invalid comparison function: {0}")]
    Invalid(String),
    #[error("sample at s = 0 has value {0} > 0: the envelope cannot be anchored at the origin")]
    StabilityAtZero(f64),
    #[error("empty sample set")]
    Empty,
}

pub type Result<T> = std::result::Result<T, CompFnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Zero at zero and strictly increasing.
    #[default]
    K,
    /// Class K and unbounded.
    Kinf,
    /// Non-increasing with limit zero.
    L,
}

impl Kind {
    pub fn is_increasing(self) -> bool {
        matches!(self, Kind::K | Kind::Kinf)
    }
}

/// Behaviour of a grid beyond its last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Extrapolation disabled: evaluation past the last breakpoint is an error.
    None,
    /// Continue with the given slope.
    Linear(f64),
    /// Decay as `v_last * exp(-rate * (s - s_last))`.
    Exponential(f64),
}

/// Monotone breakpoint table with linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: Vec<(f64, f64)>,
    pub tail: Tail,
}

impl Grid {
    fn validate(&self, kind: Kind) -> Result<()> {
        if self.points.is_empty() {
            return Err(CompFnError::Invalid("grid has no breakpoints".into()));
        }
        for w in self.points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(CompFnError::Invalid(format!(
                    "grid abscissae must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if self.points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite() || p.0 < 0.0) {
            return Err(CompFnError::Invalid("grid breakpoints must be finite and nonnegative".into()));
        }
        match kind {
            Kind::K | Kind::Kinf => {
                if self.points[0] != (0.0, 0.0) {
                    return Err(CompFnError::Invalid("class K grid must start at (0, 0)".into()));
                }
                if self.points.windows(2).any(|w| !(w[1].1 > w[0].1)) {
                    return Err(CompFnError::Invalid("class K grid values must be strictly increasing".into()));
                }
                match self.tail {
                    Tail::Linear(slope) if slope > 0.0 => {}
                    Tail::Linear(_) => return Err(CompFnError::Invalid("class K extrapolation slope must be positive".into())),
                    Tail::Exponential(_) => return Err(CompFnError::Invalid("class K grid cannot decay".into())),
                    Tail::None if kind == Kind::Kinf => {
                        return Err(CompFnError::Invalid("class K-infinity grid needs a positive slope".into()))
                    }
                    Tail::None => {}
                }
            }
            Kind::L => {
                if self.points.windows(2).any(|w| w[1].1 > w[0].1) || self.points.iter().any(|p| p.1 < 0.0) {
                    return Err(CompFnError::Invalid("class L grid values must be nonnegative and non-increasing".into()));
                }
                if let Tail::Linear(slope) = self.tail {
                    if slope > 0.0 {
                        return Err(CompFnError::Invalid("class L grid cannot grow".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn last(&self) -> (f64, f64) {
        *self.points.last().expect("validated grid is nonempty")
    }

    fn eval(&self, s: f64) -> Result<f64> {
        let (s_last, v_last) = self.last();
        if s > s_last {
            let ds = s - s_last;
            return match self.tail {
                Tail::None => Err(CompFnError::OutOfDomain { arg: s, max: s_last }),
                Tail::Linear(slope) => Ok((v_last + slope * ds).max(0.0)),
                Tail::Exponential(rate) => {
                    if v_last == 0.0 {
                        Ok(0.0)
                    } else {
                        Ok(v_last * (-rate * ds).exp())
                    }
                }
            };
        }
        let (s0, v0) = self.points[0];
        if s <= s0 {
            // Only L grids may start after zero; hold the first value.
            return Ok(v0);
        }
        let idx = self.points.partition_point(|p| p.0 <= s) - 1;
        let (sa, va) = self.points[idx];
        if s == sa || idx + 1 == self.points.len() {
            return Ok(va);
        }
        let (sb, vb) = self.points[idx + 1];
        Ok(va + (vb - va) * (s - sa) / (sb - sa))
    }

    fn invert(&self, y: f64) -> Result<f64> {
        let (s_last, v_last) = self.last();
        if y > v_last {
            return match self.tail {
                Tail::Linear(slope) if slope > 0.0 => Ok(s_last + (y - v_last) / slope),
                _ => Err(CompFnError::Range { value: y }),
            };
        }
        let idx = self.points.partition_point(|p| p.1 < y);
        if idx == 0 {
            return Ok(self.points[0].0);
        }
        let (sa, va) = self.points[idx - 1];
        let (sb, vb) = self.points[idx];
        if y == vb {
            return Ok(sb);
        }
        Ok(sa + (sb - sa) * (y - va) / (vb - va))
    }
}

/// Representation of a comparison function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Repr {
    /// `a s`
    Linear {
        a: f64,
    },
    /// `a s^p`
    Power {
        a: f64,
        p: f64,
    },
    /// `a (1 - exp(-lambda s))`, bounded class K.
    #[serde(rename = "exponential")]
    Saturating {
        a: f64,
        lambda: f64,
    },
    /// `a exp(-lambda t) + b`, class L.
    ExpDecay {
        a: f64,
        lambda: f64,
        #[serde(default)]
        b: f64,
    },
    Grid(Grid),
    /// `outer(inner(s))`
    Compose {
        outer: Box<ComparisonFunction>,
        inner: Box<ComparisonFunction>,
    },
    /// Functional inverse of a class K function.
    Inverse {
        of: Box<ComparisonFunction>,
    },
    Sum {
        terms: Vec<ComparisonFunction>,
    },
    Product {
        factors: Vec<ComparisonFunction>,
    },
    Scaled {
        factor: f64,
        of: Box<ComparisonFunction>,
    },
    /// `s -> beta(s, t)` for a fixed `t`.
    KlSection {
        beta: Box<KlBound>,
        t: f64,
    },
    ExpIntegral(Box<ExpIntegral>),
}

/// A scalar monotone function on `[0, ∞)`.
///
/// The `offset` is added to the represented value. It is zero for genuine
/// class K functions and lets nondecreasing bounds such as gradient bounds
/// (`c(0) > 0`) share the same machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFunction {
    #[serde(default)]
    pub kind: Kind,
    #[serde(flatten)]
    pub repr: Repr,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl ComparisonFunction {
    fn from_repr(kind: Kind, repr: Repr) -> Self {
        Self { kind, repr, offset: 0.0 }
    }

    pub fn linear(a: f64) -> Self {
        Self::from_repr(Kind::Kinf, Repr::Linear { a })
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn power(a: f64, p: f64) -> Self {
        Self::from_repr(Kind::Kinf, Repr::Power { a, p })
    }

    /// `a (1 - exp(-lambda s))`.
    pub fn saturating(a: f64, lambda: f64) -> Self {
        Self::from_repr(Kind::K, Repr::Saturating { a, lambda })
    }

    pub fn exp_decay(a: f64, lambda: f64, b: f64) -> Self {
        Self::from_repr(Kind::L, Repr::ExpDecay { a, lambda, b })
    }

    /// The constant function `c`, used for nondecreasing bounds such as `G`.
    pub fn constant(c: f64) -> Self {
        Self { kind: Kind::K, repr: Repr::Linear { a: 0.0 }, offset: c }
    }

    pub fn grid_k(points: Vec<(f64, f64)>, slope: Option<f64>) -> Result<Self> {
        let tail = slope.map_or(Tail::None, Tail::Linear);
        let kind = if slope.is_some() { Kind::Kinf } else { Kind::K };
        let grid = Grid { points, tail };
        grid.validate(kind)?;
        Ok(Self::from_repr(kind, Repr::Grid(grid)))
    }

    pub fn grid_l(points: Vec<(f64, f64)>, tail: Tail) -> Result<Self> {
        let grid = Grid { points, tail };
        grid.validate(Kind::L)?;
        Ok(Self::from_repr(Kind::L, Repr::Grid(grid)))
    }

    pub fn sum(terms: Vec<ComparisonFunction>) -> Self {
        let kind = if terms.iter().any(|t| t.kind == Kind::Kinf) { Kind::Kinf } else { Kind::K };
        Self::from_repr(kind, Repr::Sum { terms })
    }

    pub fn product(factors: Vec<ComparisonFunction>) -> Self {
        Self::from_repr(Kind::K, Repr::Product { factors })
    }

    pub fn scaled(self, factor: f64) -> Self {
        let kind = self.kind;
        Self::from_repr(kind, Repr::Scaled { factor, of: Box::new(self) })
    }

    pub fn kl_section(beta: KlBound, t: f64) -> Self {
        Self::from_repr(Kind::K, Repr::KlSection { beta: Box::new(beta), t })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset += offset;
        self
    }

    pub fn with_kind(mut self, kind: Kind) -> Self {
        self.kind = kind;
        self
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Whether the function is known to be unbounded.
    pub fn is_unbounded(&self) -> bool {
        self.kind == Kind::Kinf
    }

    /// Check the structural invariants that can be verified without sampling.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CompFnError::Invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match &self.repr {
            Repr::Linear { a } => {
                if self.offset == 0.0 {
                    positive("a", *a)?
                } else if *a < 0.0 {
                    return Err(CompFnError::Invalid("slope must be nonnegative".into()));
                }
            }
            Repr::Power { a, p } => {
                positive("a", *a)?;
                positive("p", *p)?;
            }
            Repr::Saturating { a, lambda } => {
                positive("a", *a)?;
                positive("lambda", *lambda)?;
                if self.kind == Kind::Kinf {
                    return Err(CompFnError::Kind("a saturating exponential is bounded".into()));
                }
            }
            Repr::ExpDecay { a, lambda, b } => {
                if self.kind != Kind::L {
                    return Err(CompFnError::Kind("exponential decay is only valid as class L".into()));
                }
                if *a < 0.0 || *lambda < 0.0 || *b < 0.0 {
                    return Err(CompFnError::Invalid("decay parameters must be nonnegative".into()));
                }
            }
            Repr::Grid(grid) => grid.validate(self.kind)?,
            Repr::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
            }
            Repr::Inverse { of } => of.validate()?,
            Repr::Sum { terms } => terms.iter().try_for_each(|t| t.validate())?,
            Repr::Product { factors } => factors.iter().try_for_each(|t| t.validate())?,
            Repr::Scaled { factor, of } => {
                positive("factor", *factor)?;
                of.validate()?
            }
            Repr::KlSection { .. } | Repr::ExpIntegral(_) => {}
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(CompFnError::NegativeArgument(s));
        }
        Ok(self.eval_repr(s)? + self.offset)
    }

    fn eval_repr(&self, s: f64) -> Result<f64> {
        Ok(match &self.repr {
            Repr::Linear { a } => a * s,
            Repr::Power { a, p } => {
                if s == 0.0 {
                    0.0
                } else {
                    a * s.powf(*p)
                }
            }
            Repr::Saturating { a, lambda } => -a * (-lambda * s).exp_m1(),
            Repr::ExpDecay { a, lambda, b } => a * (-lambda * s).exp() + b,
            Repr::Grid(grid) => grid.eval(s)?,
            Repr::Compose { outer, inner } => outer.eval(inner.eval(s)?.max(0.0))?,
            Repr::Inverse { of } => of.invert(s)?,
            Repr::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(s)?;
                }
                acc
            }
            Repr::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(s)?;
                }
                acc
            }
            Repr::Scaled { factor, of } => factor * of.eval(s)?,
            Repr::KlSection { beta, t } => beta.eval(s, *t)?,
            Repr::ExpIntegral(rho) => rho.eval(s)?,
        })
    }

    /// Solve `f(s) = y` for a class K function.
    ///
    /// Closed forms and grids are inverted analytically; compositions,
    /// inverses and scalings are inverted structurally; everything else falls
    /// back to bisection with relative tolerance [`TOL_INV`] or better.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !self.kind.is_increasing() {
            return Err(CompFnError::Kind("only class K functions can be inverted".into()));
        }
        if !(y >= 0.0) {
            return Err(CompFnError::NegativeArgument(y));
        }
        let target = y - self.offset;
        if target < 0.0 {
            return Err(CompFnError::Range { value: y });
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Linear { a } => {
                if *a > 0.0 {
                    Ok(target / a)
                } else {
                    Err(CompFnError::Range { value: y })
                }
            }
            Repr::Power { a, p } => Ok((target / a).powf(1.0 / p)),
            Repr::Saturating { a, lambda } => {
                if target >= *a {
                    Err(CompFnError::Range { value: y })
                } else {
                    Ok(-(-target / a).ln_1p() / lambda)
                }
            }
            Repr::Grid(grid) => grid.invert(target),
            Repr::Compose { outer, inner } => inner.invert(outer.invert(target)?),
            Repr::Inverse { of } => of.eval(target),
            Repr::Scaled { factor, of } => of.invert(target / factor),
            _ => self.bisect_inverse(y),
        }
    }

    fn bisect_inverse(&self, y: f64) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut grown = 0;
        while self.eval(hi)? < y {
            lo = hi;
            hi *= 2.0;
            grown += 1;
            if grown > 1000 || !hi.is_finite() {
                return Err(CompFnError::Range { value: y });
            }
        }
        for _ in 0..MAX_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid)? < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
        }
        Ok(hi)
    }

    /// The functional inverse as a new comparison function.
    pub fn inverse(&self) -> Result<Self> {
        if !self.kind.is_increasing() {
            return Err(CompFnError::Kind("only class K functions have inverses".into()));
        }
        if self.offset != 0.0 {
            return Err(CompFnError::Kind("functions with an offset are not class K".into()));
        }
        Ok(match self.repr {
            Repr::Linear { a } => Self::from_repr(self.kind, Repr::Linear { a: 1.0 / a }),
            Repr::Power { a, p } => Self::from_repr(self.kind, Repr::Power { a: a.powf(-1.0 / p), p: 1.0 / p }),
            _ => Self::from_repr(self.kind, Repr::Inverse { of: Box::new(self.clone()) }),
        })
    }

    /// `self ∘ inner` with inferred kind.
    pub fn compose(&self, inner: &ComparisonFunction) -> Result<Self> {
        let kind = match (self.kind, inner.kind) {
            (Kind::Kinf, Kind::Kinf) => Kind::Kinf,
            (a, b) if a.is_increasing() && b.is_increasing() => Kind::K,
            (a, Kind::L) if a.is_increasing() => Kind::L,
            (Kind::L, b) if b.is_increasing() => Kind::L,
            (a, b) => {
                return Err(CompFnError::Kind(format!("cannot compose {a:?} after {b:?}")));
            }
        };
        if inner.offset == 0.0 {
            let symbolic = match (&self.repr, &inner.repr) {
                (Repr::Linear { a }, Repr::Linear { a: b }) => Some(Repr::Linear { a: a * b }),
                (Repr::Linear { a }, Repr::Power { a: b, p }) => Some(Repr::Power { a: a * b, p: *p }),
                (Repr::Power { a, p }, Repr::Linear { a: b }) => Some(Repr::Power { a: a * b.powf(*p), p: *p }),
                (Repr::Power { a, p }, Repr::Power { a: b, p: q }) => Some(Repr::Power { a: a * b.powf(*p), p: p * q }),
                _ => None,
            };
            if let Some(repr) = symbolic {
                return Ok(Self { kind, repr, offset: self.offset });
            }
        }
        Ok(Self::from_repr(kind, Repr::Compose { outer: Box::new(self.clone()), inner: Box::new(inner.clone()) }))
    }

    /// `self ∘ inner`, failing unless the result has the requested kind.
    pub fn compose_as(&self, inner: &ComparisonFunction, kind: Kind) -> Result<Self> {
        let out = self.compose(inner)?;
        let ok = match kind {
            Kind::L => out.kind == Kind::L,
            Kind::K => out.kind.is_increasing(),
            Kind::Kinf => out.kind == Kind::Kinf,
        };
        if ok {
            Ok(out)
        } else {
            Err(CompFnError::Kind(format!("composition has kind {:?}, requested {kind:?}", out.kind)))
        }
    }

    /// Breakpoints for plotting or CSV export: the grid itself when the
    /// function is a plain grid, otherwise `n` samples on `[0, smax]`.
    pub fn sample_points(&self, smax: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        if let (Repr::Grid(grid), 0.0) = (&self.repr, self.offset) {
            return Ok(grid.points.clone());
        }
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let s = smax * i as f64 / (n - 1) as f64;
                self.eval(s).map(|v| (s, v))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_eval() {
        assert_eq!(ComparisonFunction::linear(2.0).eval(3.0).unwrap(), 6.0);
    }

    #[test]
    fn class_k_vanishes_at_zero() {
        for f in [
            ComparisonFunction::linear(2.0),
            ComparisonFunction::power(3.0, 0.5),
            ComparisonFunction::saturating(2.0, 1.5),
            ComparisonFunction::grid_k(vec![(0.0, 0.0), (1.0, 2.0)], Some(1.0)).unwrap(),
        ] {
            assert_eq!(f.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn grid_interpolation_and_inverse() {
        let f = ComparisonFunction::grid_k(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 8.0)], Some(6.0)).unwrap();
        assert_eq!(f.eval(1.5).unwrap(), 5.0);
        assert_eq!(f.invert(5.0).unwrap(), 1.5);
        assert_eq!(f.eval(3.0).unwrap(), 14.0);
        assert_eq!(f.invert(14.0).unwrap(), 3.0);
    }

    #[test]
    fn grid_without_tail_rejects_extrapolation() {
        let f = ComparisonFunction::grid_k(vec![(0.0, 0.0), (1.0, 2.0)], None).unwrap();
        assert!(matches!(f.eval(1.5), Err(CompFnError::OutOfDomain { .. })));
        assert!(matches!(f.invert(3.0), Err(CompFnError::Range { .. })));
    }

    #[test]
    fn invert_square() {
        let f = ComparisonFunction::power(1.0, 2.0);
        assert_relative_eq!(f.invert(9.0).unwrap(), 3.0, max_relative = TOL_INV);
        assert_eq!(f.invert(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bounded_function_range_error() {
        let f = ComparisonFunction::saturating(1.0, 1.0);
        assert!(matches!(f.invert(1.5), Err(CompFnError::Range { .. })));
        let s = f.invert(0.5).unwrap();
        assert_relative_eq!(s, 2f64.ln(), max_relative = 1e-14);
        let sum = ComparisonFunction::sum(vec![f.clone(), f]);
        assert!(matches!(sum.invert(2.5), Err(CompFnError::Range { .. })));
    }

    #[test]
    fn compose_examples() {
        let f = ComparisonFunction::linear(2.0);
        let g = ComparisonFunction::power(1.0, 2.0);
        assert_eq!(f.compose(&g).unwrap().eval(3.0).unwrap(), 18.0);

        let cube = ComparisonFunction::power(1.0, 3.0);
        let id = cube.inverse().unwrap().compose(&cube).unwrap();
        for s in [0.1, 1.0, 7.5] {
            assert_relative_eq!(id.eval(s).unwrap(), s, max_relative = 1e-12);
        }

        let sat = ComparisonFunction::saturating(3.0, 0.7);
        let id = sat.inverse().unwrap().compose(&sat).unwrap();
        for s in [0.1, 1.0, 2.5] {
            assert_relative_eq!(id.eval(s).unwrap(), s, max_relative = 1e-10);
        }
    }

    #[test]
    fn compose_kind_rules() {
        let k = ComparisonFunction::linear(1.0);
        let l = ComparisonFunction::exp_decay(1.0, 1.0, 0.0);
        assert_eq!(k.compose(&l).unwrap().kind(), Kind::L);
        assert!(k.compose_as(&l, Kind::K).is_err());
        assert!(l.compose(&l).is_err());
    }

    #[test]
    fn offset_function_inverts_above_offset() {
        let c = ComparisonFunction::linear(2.0).with_offset(1.0);
        assert_eq!(c.eval(0.0).unwrap(), 1.0);
        assert_eq!(c.invert(5.0).unwrap(), 2.0);
        assert!(c.invert(0.5).is_err());
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(ComparisonFunction::linear(1.0).eval(-1.0).is_err());
        assert!(ComparisonFunction::linear(1.0).eval(f64::NAN).is_err());
    }

    #[test]
    fn closed_form_json_round_trip() {
        let f: ComparisonFunction = serde_json::from_str(r#"{"family":"power","a":1.0,"p":2.0}"#).unwrap();
        assert_eq!(f.eval(3.0).unwrap(), 9.0);
        let g: ComparisonFunction =
            serde_json::from_str(r#"{"family":"grid","points":[[0,0],[1,2]],"tail":{"linear":2.0}}"#).unwrap();
        assert_eq!(g.eval(2.0).unwrap(), 4.0);
        let back: ComparisonFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn lower_inverse_upper_identity_when_equal() {
        let a = ComparisonFunction::power(0.5, 2.0);
        let id = a.inverse().unwrap().compose(&a).unwrap();
        for s in [0.0, 0.3, 2.0, 10.0] {
            assert_relative_eq!(id.eval(s).unwrap(), s, max_relative = 1e-14);
        }
    }

    #[test]
    fn lower_inverse_upper_monotone_in_delta() {
        let lower = ComparisonFunction::power(0.5, 2.0);
        let upper = ComparisonFunction::power(2.0, 2.0).compose(&ComparisonFunction::linear(1.0)).unwrap();
        let h = lower.inverse().unwrap().compose(&upper).unwrap();
        let mut prev = f64::INFINITY;
        for delta in [1.0, 0.5, 0.1, 0.01, 0.001] {
            let v = h.eval(delta).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
