use serde::{Deserialize, Serialize};

use super::bounds::safe_radius;
use super::{LyapunovCertificate, SynthError};
use crate::certcheck::{assess_kl_bound, BallPair, CheckConfig, Ensemble, Property, StabilityVerdict};
use crate::compfn::{ComparisonDecay, ComparisonFunction, KlBound};
use crate::sysmodel::VectorField;

/// Upper end of the search interval for the settling time.
const SETTLING_T_MAX: f64 = 1e4;
const SETTLING_TOL: f64 = 1e-6;

/// KL bound of the driving subsystem, valid on its ball pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemBound {
    pub beta: KlBound,
    pub balls: BallPair,
}

/// Radius `gamma(outer1, outer2)` of initial states whose solutions keep the
/// driven state inside the certificate's outer ball, together with the
/// threshold `delta0` above which it is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GammaSurface {
    /// `min(a1 outer1, a2 outer2)`
    Linear { a1: f64, a2: f64, delta0: f64 },
    /// Safe radius `upper⁻¹(lower(outer1))` of a composite certificate that
    /// does not increase outside `B_delta0`.
    SafeRadius { lower: ComparisonFunction, upper: ComparisonFunction, delta0: f64 },
    /// Bilinear table with rows indexed by `outer1` and columns by `outer2`.
    Grid { outer1: Vec<f64>, outer2: Vec<f64>, values: Vec<Vec<f64>>, delta0: f64 },
}

impl GammaSurface {
    pub fn delta0(&self) -> f64 {
        match self {
            GammaSurface::Linear { delta0, .. } | GammaSurface::SafeRadius { delta0, .. } | GammaSurface::Grid { delta0, .. } => {
                *delta0
            }
        }
    }

    pub fn eval(&self, outer1: f64, outer2: f64) -> Result<f64, SynthError> {
        match self {
            GammaSurface::Linear { a1, a2, .. } => Ok((a1 * outer1).min(a2 * outer2)),
            GammaSurface::SafeRadius { lower, upper, delta0 } => safe_radius(lower, upper, *delta0, outer1),
            GammaSurface::Grid { outer1: rows, outer2: cols, values, .. } => {
                let grid = crate::compfn::KlGrid { s: rows.clone(), t: cols.clone(), values: values.clone() };
                Ok(KlBound::Grid(grid).eval(outer1, outer2)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Positive inner radii; the estimate is practical.
    Practical,
    /// Zero inner radii with an exponential certificate.
    Usas,
}

/// Inputs echoed into every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub inner1: f64,
    pub outer1: f64,
    pub inner2: f64,
    pub outer2: f64,
    pub k1: f64,
    /// Gradient bound of the driven certificate at its outer radius.
    pub c1_outer: f64,
    /// Interconnection gain at the driven certificate's outer radius.
    pub g_outer: f64,
    pub gamma: f64,
    pub delta0: f64,
}

/// Closed-form constants of the estimate that do not need a settling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConstants {
    pub audit: Audit,
    pub outer: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub inner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedEstimate {
    pub variant: Variant,
    pub inner: f64,
    pub outer: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub c3: ComparisonFunction,
    pub eta: ComparisonFunction,
    pub beta: KlBound,
    pub audit: Audit,
}

impl SynthesizedEstimate {
    pub fn balls(&self) -> Result<BallPair, SynthError> {
        Ok(BallPair::new(self.inner, self.outer)?)
    }
}

fn exponential_rate(cert: &LyapunovCertificate) -> Result<f64, SynthError> {
    cert.rate().ok_or_else(|| SynthError::Precondition("the driven certificate must be in exponential form".into()))
}

fn audit(
    cert: &LyapunovCertificate,
    beta2: &SubsystemBound,
    g_of: &ComparisonFunction,
    gamma: &GammaSurface,
) -> Result<Audit, SynthError> {
    let k1 = exponential_rate(cert)?;
    let BallPair { inner: inner1, outer: outer1 } = cert.annulus;
    let BallPair { inner: inner2, outer: outer2 } = beta2.balls;
    if outer1.is_infinite() || outer2.is_infinite() {
        return Err(SynthError::Precondition("outer radii must be finite".into()));
    }
    let delta0 = gamma.delta0();
    if !(outer1 > inner1.max(delta0)) {
        return Err(SynthError::Precondition(format!(
            "outer radius {outer1} of the driven certificate must exceed both its inner radius {inner1} and delta0 = {delta0}"
        )));
    }
    Ok(Audit {
        inner1,
        outer1,
        inner2,
        outer2,
        k1,
        c1_outer: cert.grad_bound.eval(outer1)?,
        g_outer: g_of.eval(outer1)?,
        gamma: gamma.eval(outer1, outer2)?,
        delta0,
    })
}

/// The outer radius, the two residual radii and the resulting inner radius.
pub fn cascade_constants(
    cert: &LyapunovCertificate,
    beta2: &SubsystemBound,
    g_of: &ComparisonFunction,
    gamma: &GammaSurface,
) -> Result<CascadeConstants, SynthError> {
    let a = audit(cert, beta2, g_of, gamma)?;
    let (lower, upper) = (&cert.lower, &cert.upper);
    let outer = a.outer1.min(a.outer2).min(a.gamma);
    let drive = a.c1_outer * a.g_outer * a.inner2 / a.k1;
    let u1 = upper.eval(a.inner1)?;
    let delta3 = a.inner1 + lower.invert(u1 + drive)? + lower.invert(drive)?;
    let delta4 = a.inner1 + 2.0 * lower.invert(u1 + 2.0 * drive)?;
    let inner = a.inner2.max(delta3).max(delta4);
    Ok(CascadeConstants { audit: a, outer, delta3, delta4, inner })
}

/// Smallest `t` in `[0, 1e4]` with `beta(radius, t) <= level`, to `1e-6`.
fn settling_time(beta: &KlBound, radius: f64, level: f64) -> Result<f64, SynthError> {
    if beta.eval(radius, 0.0)? <= level {
        return Ok(0.0);
    }
    if beta.eval(radius, SETTLING_T_MAX)? > level {
        return Err(SynthError::SettlingTime { t_max: SETTLING_T_MAX });
    }
    let (mut lo, mut hi) = (0.0, SETTLING_T_MAX);
    while hi - lo > SETTLING_TOL {
        let mid = 0.5 * (lo + hi);
        if beta.eval(radius, mid)? <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Estimate `(inner, outer, beta)` for the cascade from a certificate for the
/// driven subsystem (exponential form, positive inner radius), a KL bound
/// for the driving subsystem, the interconnection gain and the boundedness
/// radius.
pub fn synthesize_cascade_bound(
    cert: &LyapunovCertificate,
    beta2: &SubsystemBound,
    g_of: &ComparisonFunction,
    gamma: &GammaSurface,
) -> Result<SynthesizedEstimate, SynthError> {
    if !(cert.annulus.inner > 0.0 && beta2.balls.inner > 0.0) {
        return Err(SynthError::Precondition(
            "practical synthesis needs positive inner radii; zero radii call for the USAS variant".into(),
        ));
    }
    let c = cascade_constants(cert, beta2, g_of, gamma)?;
    let a = &c.audit;
    if c.inner >= c.outer {
        return Err(SynthError::Degenerate { inner: c.inner, outer: c.outer });
    }
    let (lower, upper, k) = (&cert.lower, &cert.upper, a.k1);
    let t1 = settling_time(&beta2.beta, c.outer, a.inner2)?;
    let t2 = t1 + (upper.eval(a.outer1)? / upper.eval(a.inner1)?).ln() / k;

    let c3 = ComparisonFunction::kl_section(beta2.beta.clone(), 0.0).with_offset(a.inner2).scaled(a.c1_outer * a.g_outer);
    let drive = c3.clone().scaled(1.0 / k);
    let lower_inv = lower.inverse()?;
    let first = lower_inv.compose(&drive.clone().with_offset(upper.eval(a.inner1)?))?;
    let second = lower_inv.compose(&ComparisonFunction::sum(vec![upper.clone(), drive]))?;
    let base = first.eval(0.0)? + second.eval(0.0)?;
    let eta = ComparisonFunction::sum(vec![first, second]).with_offset(-base);
    let beta = KlBound::Max { terms: vec![KlBound::Product { eta: eta.clone(), rate: 1.0, shift: t2 }, beta2.beta.clone()] };
    Ok(SynthesizedEstimate {
        variant: Variant::Practical,
        inner: c.inner,
        outer: c.outer,
        delta3: c.delta3,
        delta4: c.delta4,
        t1: Some(t1),
        t2: Some(t2),
        c3,
        eta,
        beta,
        audit: c.audit,
    })
}

/// Estimate for zero inner radii when the driven certificate already decays
/// exponentially. The bound is
/// `lower⁻¹(upper(s) e^{-k t} + (C/k)(beta2(s,0) e^{-k t/2} + beta2(s,t/2))) + beta2(s,t)`
/// with `C` the product of the gradient bound and interconnection gain at the
/// driven certificate's outer radius.
pub fn usas_variant_check(
    cert: &LyapunovCertificate,
    beta2: &SubsystemBound,
    g_of: &ComparisonFunction,
    gamma: &GammaSurface,
) -> Result<SynthesizedEstimate, SynthError> {
    let (i1, i2) = (cert.annulus.inner, beta2.balls.inner);
    if i1 != 0.0 || i2 != 0.0 {
        return Err(SynthError::Precondition(format!("the USAS variant needs both inner radii to be zero, got {i1} and {i2}")));
    }
    let a = audit(cert, beta2, g_of, gamma)?;
    let outer = a.outer1.min(a.outer2).min(a.gamma);
    if !(outer > 0.0) {
        return Err(SynthError::Degenerate { inner: 0.0, outer });
    }
    let gain = a.c1_outer * a.g_outer;
    let beta = KlBound::Comparison(Box::new(ComparisonDecay {
        lower: cert.lower.clone(),
        upper: cert.upper.clone(),
        k: a.k1,
        gain,
        inner: beta2.beta.clone(),
    }));
    let c3 = ComparisonFunction::kl_section(beta2.beta.clone(), 0.0).scaled(gain);
    let eta = ComparisonFunction::kl_section(beta.clone(), 0.0);
    Ok(SynthesizedEstimate {
        variant: Variant::Usas,
        inner: 0.0,
        outer,
        delta3: 0.0,
        delta4: 0.0,
        t1: None,
        t2: None,
        c3,
        eta,
        beta,
        audit: a,
    })
}

/// Monte-Carlo check of `|x(t)|_inner <= beta(|x0|, t - t0)` for the stacked
/// cascade, over initial states in the estimate's outer ball.
pub fn validate_estimate<S: VectorField + ?Sized>(
    sys: &S,
    theta: &[f64],
    est: &SynthesizedEstimate,
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, SynthError> {
    let balls = est.balls()?;
    let sampler = cfg.sampler.clone().unwrap_or_else(|| cfg.plan.sampler(balls.outer, cfg.horizon));
    let ens = Ensemble::run(sys, theta, &sampler, cfg.horizon, &cfg.integrate)?;
    Ok(assess_kl_bound(&ens, balls, &est.beta, Property::Bound)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Decay;
    use approx::assert_relative_eq;

    fn quadratic_exp_cert(inner: f64, outer: f64) -> LyapunovCertificate {
        LyapunovCertificate {
            lower: ComparisonFunction::power(0.5, 2.0),
            upper: ComparisonFunction::power(0.5, 2.0),
            decay: Decay::Exponential { k: 2.0 },
            grad_bound: ComparisonFunction::identity(),
            annulus: BallPair::new(inner, outer).unwrap(),
            theta: vec![],
            function: None,
        }
    }

    fn exp_bound(inner: f64, outer: f64) -> SubsystemBound {
        SubsystemBound { beta: KlBound::exponential(1.0, 1.0), balls: BallPair::new(inner, outer).unwrap() }
    }

    fn identity_gamma() -> GammaSurface {
        GammaSurface::Linear { a1: 1.0, a2: 1.0, delta0: 0.0 }
    }

    #[test]
    fn hand_computed_linear_cascade_constants() {
        let c = cascade_constants(
            &quadratic_exp_cert(0.1, 5.0),
            &exp_bound(0.001, 5.0),
            &ComparisonFunction::constant(1.0),
            &identity_gamma(),
        )
        .unwrap();
        // drive = c1 G inner2 / k = 5 * 0.001 / 2
        let drive: f64 = 0.0025;
        let d3 = 0.1 + (2.0 * (0.005 + drive)).sqrt() + (2.0 * drive).sqrt();
        let d4 = 0.1 + 2.0 * (2.0 * (0.005 + 2.0 * drive)).sqrt();
        assert_relative_eq!(c.delta3, d3, max_relative = 1e-12);
        assert_relative_eq!(c.delta4, d4, max_relative = 1e-12);
        assert_relative_eq!(c.inner, 0.382842712474619, max_relative = 1e-12);
        assert_eq!(c.outer, 5.0);
    }

    #[test]
    fn zero_drive_gives_two_and_three_inner_radii() {
        let c = cascade_constants(
            &quadratic_exp_cert(0.1, 5.0),
            &exp_bound(0.0, 5.0),
            &ComparisonFunction::constant(7.0),
            &identity_gamma(),
        )
        .unwrap();
        assert_relative_eq!(c.delta3, 0.2, max_relative = 1e-12);
        assert_relative_eq!(c.delta4, 0.3, max_relative = 1e-12);
        assert_relative_eq!(c.inner, 0.3, max_relative = 1e-12);
    }

    #[test]
    fn settling_and_eta() {
        let est = synthesize_cascade_bound(
            &quadratic_exp_cert(0.1, 5.0),
            &exp_bound(0.001, 5.0),
            &ComparisonFunction::constant(1.0),
            &identity_gamma(),
        )
        .unwrap();
        assert!((est.t1.unwrap() - (5.0f64 / 0.001).ln()).abs() <= 2e-6);
        assert_relative_eq!(est.t2.unwrap() - est.t1.unwrap(), (5.0f64 / 0.1).ln(), max_relative = 1e-12);
        assert_eq!(est.eta.eval(0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for i in 1..=20 {
            let v = est.eta.eval(5.0 * i as f64 / 20.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        est.beta.check_monotone(5.0, 40.0, 30).unwrap();
        let back: SynthesizedEstimate = serde_json::from_str(&serde_json::to_string(&est).unwrap()).unwrap();
        assert_eq!(back.inner, est.inner);
    }

    #[test]
    fn settling_time_failure_is_an_error() {
        let err = synthesize_cascade_bound(
            &quadratic_exp_cert(0.1, 5.0),
            &SubsystemBound { beta: KlBound::exponential(1.0, 1e-6), balls: BallPair::new(0.001, 5.0).unwrap() },
            &ComparisonFunction::constant(1.0),
            &identity_gamma(),
        )
        .unwrap_err();
        assert!(matches!(err, SynthError::SettlingTime { .. }));
    }

    #[test]
    fn degenerate_when_inner_too_large() {
        let err = synthesize_cascade_bound(
            &quadratic_exp_cert(1.5, 2.0),
            &exp_bound(0.001, 2.0),
            &ComparisonFunction::constant(1.0),
            &identity_gamma(),
        )
        .unwrap_err();
        assert!(matches!(err, SynthError::Degenerate { .. }));
    }

    #[test]
    fn usas_preconditions() {
        let g = ComparisonFunction::constant(1.0);
        let mixed = usas_variant_check(&quadratic_exp_cert(0.1, 5.0), &exp_bound(0.0, 5.0), &g, &identity_gamma());
        assert!(mixed.is_err());
        let far = GammaSurface::Linear { a1: 1.0, a2: 1.0, delta0: 6.0 };
        assert!(usas_variant_check(&quadratic_exp_cert(0.0, 5.0), &exp_bound(0.0, 5.0), &g, &far).is_err());
        let est = usas_variant_check(&quadratic_exp_cert(0.0, 5.0), &exp_bound(0.0, 5.0), &g, &identity_gamma()).unwrap();
        assert_eq!(est.inner, 0.0);
        est.beta.check_monotone(5.0, 20.0, 30).unwrap();
    }
}
