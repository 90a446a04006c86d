use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Decay, LyapunovCertificate, LyapunovFunction, LyapunovHandle, SynthError};
use crate::certcheck::{norm, BallPair};
use crate::compfn::{CompFnError, ComparisonFunction, ExpIntegral, Kind, Repr};
use crate::sysmodel::VectorField;

/// Relative tolerance of the quadrature behind the exponential transform.
const TRANSFORM_QUAD_TOL: f64 = 1e-9;
/// Agreement required between `lower⁻¹ ∘ upper` before and after transforming.
const TRANSFORM_INVARIANCE_TOL: f64 = 1e-8;
/// `ln rho` must stay inside this range on the annulus so that `rho`
/// neither overflows nor underflows.
const MAX_LN_RHO: f64 = 700.0;

/// `rho(V(t, x))` for a scalar reparameterization `rho`.
struct Reparameterized {
    base: Arc<dyn LyapunovFunction>,
    rho: ExpIntegral,
}

impl LyapunovFunction for Reparameterized {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.rho.eval(self.base.value(t, x).max(0.0)).unwrap_or(f64::NAN)
    }

    fn gradient(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        let v = self.base.value(t, x).max(0.0);
        let scale = self.rho.derivative(v).unwrap_or(f64::NAN);
        let (dt, g) = self.base.gradient(t, x);
        (scale * dt, g.into_iter().map(|gi| scale * gi).collect())
    }
}

/// Turn a certificate with decrease `V' <= -alpha(|x|)` into one with
/// `W' <= -k W` for `W = rho(V)`, where
/// `rho(s) = exp(∫_1^s k / a(q) dq)` (up to a constant factor when that
/// keeps `rho` representable) and `a = alpha ∘ upper⁻¹`.
///
/// The new sandwich bounds are `rho ∘ lower` and `rho ∘ upper`, so
/// `lower⁻¹ ∘ upper` is unchanged; this is verified at ten radii before
/// returning. The new gradient bound is
/// `k rho(upper(s)) / a(lower(inner)) * grad_bound(s)`.
pub fn transform_lyapunov(cert: &LyapunovCertificate, k: f64) -> Result<LyapunovCertificate, SynthError> {
    let Decay::Rate { alpha } = &cert.decay else {
        return Err(SynthError::Precondition("certificate is already in exponential form".into()));
    };
    if !(k > 0.0) {
        return Err(SynthError::Precondition(format!("target rate must be positive, got {k}")));
    }
    let BallPair { inner, outer } = cert.annulus;
    if !(inner > 0.0) {
        return Err(SynthError::Precondition("the transform needs a positive inner radius".into()));
    }
    if outer.is_infinite() {
        return Err(SynthError::Precondition("the transform needs a bounded annulus".into()));
    }
    let a = alpha.compose(&cert.upper.inverse()?)?;
    let q_lo = cert.lower.eval(inner)? * 1e-3;
    let q_hi = cert.upper.eval(outer)?;
    let mut rho =
        ExpIntegral::new(a.clone(), k, q_lo, q_hi, TRANSFORM_QUAD_TOL).map_err(|e| SynthError::Transform(e.to_string()))?;
    // Any positive multiple of rho works equally well; rescale only when the
    // values on the annulus would not fit in a double otherwise.
    let ln_lo = rho.ln_eval(cert.lower.eval(inner)?)?;
    let ln_hi = rho.ln_eval(q_hi)?;
    if !(ln_lo > -MAX_LN_RHO && ln_hi < MAX_LN_RHO) {
        rho.shift_log(-0.5 * (ln_lo + ln_hi));
    }
    if !(ln_hi - ln_lo < 2.0 * MAX_LN_RHO) {
        return Err(SynthError::Transform(format!(
            "rho grows by e^{:.1} across the annulus, beyond double precision; use a smaller rate",
            ln_hi - ln_lo
        )));
    }
    let a_floor = a.eval(cert.lower.eval(inner)?)?;
    if !(a_floor > 0.0) {
        return Err(SynthError::Transform("decay rate vanishes at the inner radius".into()));
    }
    let rho_fn = ComparisonFunction { kind: Kind::K, repr: Repr::ExpIntegral(Box::new(rho.clone())), offset: 0.0 };
    let lower = rho_fn.compose(&cert.lower)?;
    let upper = rho_fn.compose(&cert.upper)?;
    let grad_bound = ComparisonFunction::product(vec![rho_fn.compose(&cert.upper)?.scaled(k / a_floor), cert.grad_bound.clone()]);

    for i in 0..10 {
        let s = inner + (outer - inner) * i as f64 / 9.0;
        let before = cert.lower.invert(cert.upper.eval(s)?)?;
        let after = lower.invert(upper.eval(s)?)?;
        if (before - after).abs() > TRANSFORM_INVARIANCE_TOL * before.abs().max(1.0) {
            return Err(SynthError::Transform(format!("lower⁻¹ ∘ upper changed at s = {s}: {before} before, {after} after")));
        }
    }

    Ok(LyapunovCertificate {
        lower,
        upper,
        decay: Decay::Exponential { k },
        grad_bound,
        annulus: cert.annulus,
        theta: cert.theta.clone(),
        function: cert
            .function
            .as_ref()
            .map(|f| LyapunovHandle(Arc::new(Reparameterized { base: f.0.clone(), rho }) as Arc<dyn LyapunovFunction>)),
    })
}

/// Comparison bound for `V' <= -k V + c` on an annulus with inner radius
/// `inner`:
/// `lower⁻¹(upper(inner) + c/k) + lower⁻¹(upper(|x0|) e^{-k t} + c/k)`.
#[allow(clippy::too_many_arguments)]
pub fn comparison_bound(
    lower: &ComparisonFunction,
    upper: &ComparisonFunction,
    k: f64,
    c: f64,
    inner: f64,
    x0_norm: f64,
    elapsed: f64,
) -> Result<f64, SynthError> {
    if !(k > 0.0) {
        return Err(SynthError::Precondition(format!("rate must be positive, got {k}")));
    }
    if !(c >= 0.0) {
        return Err(SynthError::Precondition(format!("constant must be nonnegative, got {c}")));
    }
    let residual = lower.invert(upper.eval(inner)? + c / k)?;
    let transient = lower.invert(upper.eval(x0_norm)? * (-k * elapsed).exp() + c / k)?;
    Ok(residual + transient)
}

/// Radius `upper⁻¹(lower(b))` of initial states that stay in `B_b` when the
/// certificate does not increase on the annulus `a <= |x| <= b`.
pub fn safe_radius(lower: &ComparisonFunction, upper: &ComparisonFunction, a: f64, b: f64) -> Result<f64, SynthError> {
    if !(b > a && a >= 0.0) {
        return Err(SynthError::Precondition(format!("need 0 <= a < b, got a = {a}, b = {b}")));
    }
    let (ua, lb) = (upper.eval(a)?, lower.eval(b)?);
    if !(ua < lb) {
        return Err(SynthError::Precondition(format!("upper({a}) = {ua} is not below lower({b}) = {lb}")));
    }
    Ok(upper.invert(lb)?)
}

/// A sampled point where a certificate inequality fails, with both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifierReport {
    pub checked: usize,
    pub violations: usize,
    /// Point with the largest `lhs - rhs`.
    pub worst: Option<Witness>,
}

impl FalsifierReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

fn annulus_points(dim: usize, balls: BallPair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = if balls.is_global() { 1e3 } else { balls.outer };
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&g).max(1e-300);
            let r = balls.inner + (hi - balls.inner) * rng.random::<f64>();
            g.into_iter().map(|v| v * r / n).collect()
        })
        .collect()
}

fn derivative_along<S: VectorField + ?Sized>(sys: &S, v: &dyn LyapunovFunction, theta: &[f64], t: f64, x: &[f64]) -> f64 {
    let mut f = vec![0.0; x.len()];
    sys.rhs(t, x, theta, &mut f);
    let (dt, g) = v.gradient(t, x);
    dt + g.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>()
}

struct Tally {
    checked: usize,
    violations: usize,
    worst: Option<Witness>,
    worst_gap: f64,
}

impl Tally {
    fn new() -> Self {
        Self { checked: 0, violations: 0, worst: None, worst_gap: f64::NEG_INFINITY }
    }

    /// Record the requirement `lhs <= rhs` with relative slack `slack`.
    fn record(&mut self, t: f64, x: &[f64], lhs: f64, rhs: f64, slack: f64) {
        self.checked += 1;
        let gap = lhs - rhs;
        let bad = !(gap <= slack * (1.0 + lhs.abs().max(rhs.abs())));
        if bad {
            self.violations += 1;
        }
        if gap > self.worst_gap || (bad && self.worst.is_none()) {
            self.worst_gap = gap;
            self.worst = Some(Witness { t, x: x.to_vec(), lhs, rhs });
        }
    }

    fn report(self) -> FalsifierReport {
        FalsifierReport { checked: self.checked, violations: self.violations, worst: self.worst }
    }
}

/// Sample the annulus at each time and test `V' <= 0` along `sys`.
pub fn falsify_nonincreasing<S: VectorField + ?Sized>(
    sys: &S,
    v: &dyn LyapunovFunction,
    theta: &[f64],
    annulus: BallPair,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> FalsifierReport {
    let mut tally = Tally::new();
    for x in annulus_points(sys.dim(), annulus, samples, seed) {
        for &t in times {
            tally.record(t, &x, derivative_along(sys, v, theta, t, &x), 0.0, 0.0);
        }
    }
    tally.report()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotOptions {
    /// Sampled states per annulus.
    pub samples: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    /// The inner-limit sequence must end below this and the outer-limit
    /// sequence above its reciprocal.
    pub limit_tol: f64,
    /// Relative slack for the sampled inequalities.
    pub slack: f64,
}

impl Default for PilotOptions {
    fn default() -> Self {
        Self { samples: 400, times: vec![0.0, 0.7, 1.9, 3.3, 10.0], seed: 0, limit_tol: 1e-3, slack: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub balls: BallPair,
    pub theta: Vec<f64>,
    /// `lower(|x|) <= V <= upper(|x|)`
    pub sandwich: FalsifierReport,
    /// `V' <= -alpha(|x|)` or `V' <= -k V`
    pub decrease: FalsifierReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    /// `(radius, value)` along the sequence.
    pub values: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovUspasReport {
    pub holds: bool,
    pub pairs: Vec<PairReport>,
    /// `lower⁻¹ ∘ upper (inner)` as the inner radius shrinks.
    pub inner_limit: ConditionReport,
    /// `upper⁻¹ ∘ lower (outer)` as the outer radius grows.
    pub outer_limit: ConditionReport,
}

/// A map from balls to a certificate valid on the corresponding annulus.
pub trait CertificateFamily {
    fn certificate(&self, balls: BallPair) -> Result<LyapunovCertificate, SynthError>;
}

impl<F> CertificateFamily for F
where
    F: Fn(BallPair) -> Result<LyapunovCertificate, SynthError>,
{
    fn certificate(&self, balls: BallPair) -> Result<LyapunovCertificate, SynthError> {
        self(balls)
    }
}

fn limit_sequence<F>(radii: &[f64], increasing: bool, target: f64, mut value: F) -> ConditionReport
where
    F: FnMut(f64) -> Result<f64, SynthError>,
{
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        match value(r) {
            Ok(v) => values.push((r, v)),
            Err(e) => {
                return ConditionReport { holds: false, values, note: Some(format!("at radius {r}: {e}")) };
            }
        }
    }
    let monotone = values.windows(2).all(|w| if increasing { w[1].1 >= w[0].1 } else { w[1].1 <= w[0].1 });
    let last = values.last().map_or(f64::NAN, |v| v.1);
    let reached = if increasing { last > target } else { last < target };
    let note = match (monotone, reached) {
        (true, true) => None,
        (false, _) => Some("sequence is not monotone".into()),
        (true, false) => Some(format!("last value {last} does not pass {target}")),
    };
    ConditionReport { holds: monotone && reached, values, note }
}

/// Practical-stability conditions for a family of certificates: the sandwich
/// and decrease inequalities are sampled on every annulus `(inner, outer)`
/// from the two sequences, and the limit conditions are evaluated along
/// `inner_seq` (with the first outer radius) and `outer_seq` (with the
/// first inner radius).
pub fn check_lyapunov_uspas<S, F>(
    sys: &S,
    family: &F,
    inner_seq: &[f64],
    outer_seq: &[f64],
    opts: &PilotOptions,
) -> Result<LyapunovUspasReport, SynthError>
where
    S: VectorField + ?Sized,
    F: CertificateFamily + ?Sized,
{
    if inner_seq.is_empty() || outer_seq.is_empty() {
        return Err(SynthError::Precondition("radius sequences must be nonempty".into()));
    }
    let mut pairs = Vec::new();
    for (i, &inner) in inner_seq.iter().enumerate() {
        for (j, &outer) in outer_seq.iter().enumerate() {
            if !(outer > inner) {
                continue;
            }
            let balls = BallPair::new(inner, outer)?;
            let cert = family.certificate(balls)?;
            let Some(v) = cert.function.as_ref().map(|h| h.0.clone()) else {
                return Err(SynthError::Precondition("certificate family must supply V".into()));
            };
            let mut sandwich = Tally::new();
            let mut decrease = Tally::new();
            let seed = opts.seed.wrapping_add((i * outer_seq.len() + j) as u64);
            for x in annulus_points(sys.dim(), balls, opts.samples, seed) {
                let r = norm(&x);
                let (lo, hi) = (cert.lower.eval(r)?, cert.upper.eval(r)?);
                for &t in &opts.times {
                    let val = v.value(t, &x);
                    sandwich.record(t, &x, lo, val, opts.slack);
                    sandwich.record(t, &x, val, hi, opts.slack);
                    let bound = match &cert.decay {
                        Decay::Rate { alpha } => -alpha.eval(r)?,
                        Decay::Exponential { k } => -k * val,
                    };
                    decrease.record(t, &x, derivative_along(sys, v.as_ref(), &cert.theta, t, &x), bound, opts.slack);
                }
            }
            pairs.push(PairReport { balls, theta: cert.theta.clone(), sandwich: sandwich.report(), decrease: decrease.report() });
        }
    }

    let first_outer = outer_seq[0];
    let inner_limit = limit_sequence(inner_seq, false, opts.limit_tol, |d| {
        let cert = family.certificate(BallPair::new(d, first_outer)?)?;
        Ok(cert.lower.invert(cert.upper.eval(d)?)?)
    });
    let first_inner = inner_seq[0];
    let outer_limit = limit_sequence(outer_seq, true, 1.0 / opts.limit_tol, |big| {
        let cert = family.certificate(BallPair::new(first_inner, big)?)?;
        let lb = cert.lower.eval(big)?;
        cert.upper.invert(lb).map_err(|e| match e {
            CompFnError::Range { .. } => SynthError::Precondition(format!("upper bound never reaches {lb}: it is bounded")),
            other => other.into(),
        })
    });
    let holds = pairs.iter().all(|p| p.sandwich.holds() && p.decrease.holds()) && inner_limit.holds && outer_limit.holds;
    Ok(LyapunovUspasReport { holds, pairs, inner_limit, outer_limit })
}
