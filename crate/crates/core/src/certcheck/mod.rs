//! Sampling-based verdicts for uniform stability, attractivity, asymptotic
//! stability and boundedness of a ball, practical stability over a parameter
//! schedule, and D-set estimation.
//!
//! Each check integrates one ensemble and then assesses it. The `assess_*`
//! functions work on a stored [`Ensemble`], so a set of trajectories can be
//! re-evaluated for other balls without integrating again.

mod verdict;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compfn::{fit_k_envelope, fit_l_envelope, kl_from_us_ua, CompFnError, KlBound};
use crate::sysmodel::{
    ensemble, InitialCondition, InitialConditionSampler, IntegrateError, IntegrateOptions, SamplerKind, SamplingPlan, Trajectory,
    VectorField,
};

pub use verdict::{Counterexample, Property, ScheduleEntry, StabilityVerdict, Status, Witnesses};

/// Envelope value allowed at the smallest sampled radius, as a multiple of it.
pub const ANCHOR_FACTOR: f64 = 3.0;
/// Default attractivity tolerance as a fraction of the outer radius.
pub const TAIL_TOL_FRACTION: f64 = 1e-3;
/// Shell radii used when the outer ball is the whole space.
const GLOBAL_RADII: (f64, f64) = (1e-2, 1e2);

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("invalid balls: need outer > inner >= 0, got inner = {inner}, outer = {outer}")]
    Balls { inner: f64, outer: f64 },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("the ball schedule must have inner radii non-increasing and outer radii non-decreasing")]
    Schedule,
    #[error("parameter {theta:?} chosen for inner = {inner}, outer = {outer} lies outside the declared parameter set")]
    OutsideParameterSet { theta: Vec<f64>, inner: f64, outer: f64 },
    #[error("parameter vector has length {got}, the system expects {expected}")]
    ParamLength { got: usize, expected: usize },
    #[error("invalid horizon {0}")]
    Horizon(f64),
    #[error(transparent)]
    CompFn(#[from] CompFnError),
}

mod radius_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Radius {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Radius::deserialize(d)? {
            Radius::Number(v) => Ok(v),
            Radius::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Radius::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// An inner ball `B_inner` and an outer ball `B_outer`. An infinite outer
/// radius stands for the whole state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPair {
    pub inner: f64,
    #[serde(with = "radius_serde")]
    pub outer: f64,
}

impl BallPair {
    pub fn new(inner: f64, outer: f64) -> Result<Self, CheckError> {
        if !(inner >= 0.0) || !(outer > inner) || inner.is_infinite() {
            return Err(CheckError::Balls { inner, outer });
        }
        Ok(Self { inner, outer })
    }

    pub fn is_global(&self) -> bool {
        self.outer.is_infinite()
    }

    /// Whether `x` lies in the annulus `inner <= |x| <= outer`.
    pub fn in_annulus(&self, x: &[f64]) -> bool {
        let r = norm(x);
        r >= self.inner && r <= self.outer
    }

    /// Largest radius that sampling should cover.
    pub fn sample_radius(&self) -> f64 {
        if self.is_global() {
            GLOBAL_RADII.1
        } else {
            self.outer
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distance from `x` to the closed ball of radius `radius` about the origin.
pub fn set_distance(x: &[f64], radius: f64) -> f64 {
    (norm(x) - radius).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub horizon: f64,
    pub plan: SamplingPlan,
    pub integrate: IntegrateOptions,
    /// Attractivity tolerance; defaults to `1e-3` times the outer radius.
    pub tail_tol: Option<f64>,
    /// Replaces the shell sampler derived from `plan` when set.
    pub sampler: Option<InitialConditionSampler>,
}

impl CheckConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self {
            horizon,
            plan: SamplingPlan::with_seed(seed),
            integrate: IntegrateOptions::default(),
            tail_tol: None,
            sampler: None,
        }
    }

    /// Sampler used for a check on `balls`.
    pub fn sampler_for(&self, balls: &BallPair) -> InitialConditionSampler {
        if let Some(s) = &self.sampler {
            return s.clone();
        }
        if balls.is_global() {
            let (lo, hi) = GLOBAL_RADII;
            let plan = SamplingPlan { min_radius_fraction: lo / hi, ..self.plan.clone() };
            return plan.sampler(hi, self.horizon);
        }
        self.plan.sampler(balls.outer, self.horizon)
    }

    pub fn tail_tol_for(&self, balls: &BallPair) -> f64 {
        self.tail_tol.unwrap_or(TAIL_TOL_FRACTION * balls.sample_radius())
    }
}

/// Initial conditions together with their integration outcomes.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub ics: Vec<InitialCondition>,
    pub results: Vec<Result<Trajectory, IntegrateError>>,
    pub seed: u64,
    pub t0_probes: Vec<f64>,
    pub horizon: f64,
}

impl Ensemble {
    pub fn run<S: VectorField + ?Sized>(
        sys: &S,
        theta: &[f64],
        sampler: &InitialConditionSampler,
        horizon: f64,
        opts: &IntegrateOptions,
    ) -> Result<Self, CheckError> {
        if theta.len() != sys.param_dim() {
            return Err(CheckError::ParamLength { got: theta.len(), expected: sys.param_dim() });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(CheckError::Horizon(horizon));
        }
        let ics = sampler.generate(sys.dim());
        let results = ensemble(sys, &ics, theta, horizon, opts);
        Ok(Self { ics, results, seed: sampler.seed, t0_probes: sampler.t0_probes.clone(), horizon })
    }

    fn verdict(&self, property: Property, balls: Option<BallPair>) -> StabilityVerdict {
        StabilityVerdict::new(property, balls, self.ics.len(), self.seed, self.t0_probes.clone(), self.horizon)
    }

    /// Members whose initial state lies in the closed ball of radius `radius`.
    fn within(&self, radius: f64) -> impl Iterator<Item = (&InitialCondition, &Result<Trajectory, IntegrateError>)> {
        self.ics.iter().zip(&self.results).filter(move |(ic, _)| ic.norm() <= radius * (1.0 + 1e-12))
    }

    /// Record integration failures as counterexamples; returns whether any occurred.
    fn record_failures(&self, v: &mut StabilityVerdict, radius: f64) -> bool {
        let mut any = false;
        for (ic, res) in self.within(radius) {
            if let Err(e) = res {
                any = true;
                v.failed_samples += 1;
                let (t, state_norm) = match e {
                    IntegrateError::Divergence { t, state } => (*t, norm(state)),
                    IntegrateError::Stiffness { t } | IntegrateError::StepLimit { t } => (*t, f64::NAN),
                    IntegrateError::Invalid(_) => (ic.t0, f64::NAN),
                };
                let margin = if state_norm.is_finite() { state_norm } else { 0.0 };
                v.fail(
                    Status::Falsified,
                    Counterexample { t0: ic.t0, x0: ic.x0.clone(), elapsed: t - ic.t0, margin, reason: e.to_string() },
                );
            }
        }
        any
    }
}

/// Uniform stability of `B_inner` on `B_outer` from stored trajectories.
pub fn assess_us(ens: &Ensemble, balls: BallPair) -> Result<StabilityVerdict, CheckError> {
    let mut v = ens.verdict(Property::Us, Some(balls));
    if ens.record_failures(&mut v, balls.outer) {
        return Ok(v);
    }
    let mut pairs = Vec::new();
    let mut members = Vec::new();
    for (ic, res) in ens.within(balls.outer) {
        let tr = res.as_ref().expect("failures handled above");
        let (mut sup, mut at) = (0.0f64, 0.0);
        for (e, x) in tr.iter() {
            let d = set_distance(x, balls.inner);
            if d > sup {
                sup = d;
                at = e;
            }
        }
        pairs.push((ic.norm(), sup));
        members.push((ic, sup, at));
    }
    let r_min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let eta = match fit_k_envelope(&pairs) {
        Ok(eta) => eta,
        Err(CompFnError::StabilityAtZero(val)) => {
            let (ic, _, at) = members.iter().find(|m| m.0.norm() == 0.0).expect("zero-radius sample");
            v.fail(
                Status::InconclusiveUnstable,
                Counterexample {
                    t0: ic.t0,
                    x0: ic.x0.clone(),
                    elapsed: *at,
                    margin: val,
                    reason: "trajectory from the origin leaves the inner ball".into(),
                },
            );
            return Ok(v);
        }
        Err(e) => return Err(e.into()),
    };
    let allowed = ANCHOR_FACTOR * r_min;
    let at_min = eta.eval(r_min)?;
    if at_min > allowed {
        let (ic, sup, at) =
            members.iter().filter(|m| m.0.norm() == r_min).max_by(|a, b| a.1.total_cmp(&b.1)).expect("smallest radius sampled");
        v.fail(
            Status::InconclusiveUnstable,
            Counterexample {
                t0: ic.t0,
                x0: ic.x0.clone(),
                elapsed: *at,
                margin: sup - allowed,
                reason: format!("envelope at the smallest radius {r_min} exceeds {ANCHOR_FACTOR} times that radius"),
            },
        );
        return Ok(v);
    }
    v.witnesses.eta = Some(eta);
    Ok(v)
}

/// Uniform attractivity of `B_inner` on `B_outer` from stored trajectories.
pub fn assess_ua(ens: &Ensemble, balls: BallPair, tail_tol: f64) -> Result<StabilityVerdict, CheckError> {
    let mut v = ens.verdict(Property::Ua, Some(balls));
    if ens.record_failures(&mut v, balls.outer) {
        return Ok(v);
    }
    let mut pooled = Vec::new();
    let mut worst: Option<(&InitialCondition, f64, f64)> = None;
    for (ic, res) in ens.within(balls.outer) {
        let tr = res.as_ref().expect("failures handled above");
        for (e, x) in tr.iter() {
            pooled.push((e, set_distance(x, balls.inner)));
        }
        let end = set_distance(tr.last(), balls.inner);
        let t_end = *tr.elapsed.last().unwrap();
        if worst.is_none_or(|w| end > w.1) {
            worst = Some((ic, end, t_end));
        }
    }
    if pooled.is_empty() {
        return Err(CheckError::CompFn(CompFnError::Empty));
    }
    let sigma = fit_l_envelope(&pooled)?;
    let tail = sigma.eval(ens.horizon)?;
    if tail > tail_tol {
        let (ic, end, t_end) = worst.expect("nonempty ensemble");
        v.fail(
            Status::Falsified,
            Counterexample {
                t0: ic.t0,
                x0: ic.x0.clone(),
                elapsed: t_end,
                margin: end - tail_tol,
                reason: format!("distance to the inner ball is still {end} at the horizon (tolerance {tail_tol})"),
            },
        );
        return Ok(v);
    }
    v.witnesses.sigma = Some(sigma);
    Ok(v)
}

/// Pointwise check `|x(t)|_inner <= beta(|x0|, t - t0)` over stored
/// trajectories starting in `B_outer`. Integration failures count as
/// violations. Returns the verdict with `max_margin` filled in.
pub fn assess_kl_bound(
    ens: &Ensemble,
    balls: BallPair,
    beta: &KlBound,
    property: Property,
) -> Result<StabilityVerdict, CheckError> {
    let mut v = ens.verdict(property, Some(balls));
    ens.record_failures(&mut v, balls.outer);
    let mut max_margin = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for (ic, res) in ens.within(balls.outer) {
        let Ok(tr) = res else { continue };
        let s = ic.norm();
        for (e, x) in tr.iter() {
            let d = set_distance(x, balls.inner);
            let b = beta.eval(s, e)?;
            let margin = d - b;
            if margin > max_margin {
                max_margin = margin;
            }
            if d > b {
                violations += 1;
                v.fail(
                    Status::Falsified,
                    Counterexample {
                        t0: ic.t0,
                        x0: ic.x0.clone(),
                        elapsed: e,
                        margin,
                        reason: "trajectory exceeds the bound".into(),
                    },
                );
            }
        }
    }
    if max_margin.is_finite() {
        v.max_margin = Some(max_margin);
    }
    if violations > 0 {
        v.note = Some(format!("{violations} sampled points exceed the bound"));
    } else if v.holds {
        v.witnesses.beta = Some(beta.clone());
    }
    Ok(v)
}

/// Uniform asymptotic stability from stored trajectories: US and UA, with the
/// witnesses combined into a KL bound that is checked against every sample.
pub fn assess_uas(ens: &Ensemble, balls: BallPair, tail_tol: f64) -> Result<StabilityVerdict, CheckError> {
    let us = assess_us(ens, balls)?;
    let ua = assess_ua(ens, balls, tail_tol)?;
    let mut v = ens.verdict(Property::Uas, Some(balls));
    v.failed_samples = us.failed_samples.max(ua.failed_samples);
    for part in [&us, &ua] {
        if !part.holds {
            let cx = part.counterexample.clone().expect("failed verdicts carry a counterexample");
            v.fail(part.status, cx);
        }
    }
    if !v.holds {
        v.witnesses.eta = us.witnesses.eta;
        v.witnesses.sigma = ua.witnesses.sigma;
        return Ok(v);
    }
    let eta = us.witnesses.eta.expect("holding verdict has a witness");
    let sigma = ua.witnesses.sigma.expect("holding verdict has a witness");
    let beta = kl_from_us_ua(eta.clone(), sigma.clone());
    let dom = assess_kl_bound(ens, balls, &beta, Property::Uas)?;
    if !dom.holds {
        // Cannot happen for exact envelopes; kept as a guard on the construction.
        let cx = dom.counterexample.expect("failed verdicts carry a counterexample");
        v.fail(Status::Falsified, cx);
    }
    v.max_margin = dom.max_margin;
    v.witnesses = Witnesses { eta: Some(eta), sigma: Some(sigma), beta: Some(beta), ..Witnesses::default() };
    Ok(v)
}

fn run_for<S: VectorField + ?Sized>(sys: &S, theta: &[f64], balls: &BallPair, cfg: &CheckConfig) -> Result<Ensemble, CheckError> {
    Ensemble::run(sys, theta, &cfg.sampler_for(balls), cfg.horizon, &cfg.integrate)
}

pub fn check_us<S: VectorField + ?Sized>(
    sys: &S,
    theta: &[f64],
    balls: BallPair,
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, CheckError> {
    assess_us(&run_for(sys, theta, &balls, cfg)?, balls)
}

pub fn check_ua<S: VectorField + ?Sized>(
    sys: &S,
    theta: &[f64],
    balls: BallPair,
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, CheckError> {
    assess_ua(&run_for(sys, theta, &balls, cfg)?, balls, cfg.tail_tol_for(&balls))
}

pub fn check_uas<S: VectorField + ?Sized>(
    sys: &S,
    theta: &[f64],
    balls: BallPair,
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, CheckError> {
    assess_uas(&run_for(sys, theta, &balls, cfg)?, balls, cfg.tail_tol_for(&balls))
}

/// Uniform boundedness on the ball of radius `radius`: fits `gamma` and `mu`
/// with `|x(t)| <= gamma(|x0|) + mu` on every sample.
pub fn assess_ub(ens: &Ensemble, radius: f64) -> Result<StabilityVerdict, CheckError> {
    let mut v = ens.verdict(Property::Ub, None);
    if ens.record_failures(&mut v, radius) {
        return Ok(v);
    }
    let pairs: Vec<(f64, f64)> = ens
        .within(radius)
        .map(|(ic, res)| {
            let tr = res.as_ref().expect("failures handled above");
            (ic.norm(), tr.norms(0..tr.dim).into_iter().fold(0.0, f64::max))
        })
        .collect();
    if pairs.is_empty() {
        return Err(CheckError::CompFn(CompFnError::Empty));
    }
    // Offset: the sup envelope extrapolated linearly to the origin from the
    // smallest radius and the smallest one at least twice as large. Closer
    // pairs (uniform samples) make the slope meaningless.
    let sup_at = |r: f64| pairs.iter().filter(|p| p.0 == r).map(|p| p.1).fold(0.0, f64::max);
    let r1 = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let v1 = sup_at(r1);
    let r2 = pairs.iter().map(|p| p.0).filter(|r| *r >= 2.0 * r1).fold(f64::INFINITY, f64::min);
    let mu = if r2.is_finite() && r1 > 0.0 {
        let slope = (sup_at(r2) - v1).max(0.0) / (r2 - r1);
        (v1 - slope * r1).clamp(0.0, v1)
    } else {
        (v1 - r1).max(0.0)
    };
    let excess: Vec<(f64, f64)> = pairs.iter().map(|&(s, sup)| (s, (sup - mu).max(0.0))).collect();
    v.witnesses.gamma = Some(fit_k_envelope(&excess)?);
    v.witnesses.mu = Some(mu);
    Ok(v)
}

pub fn check_ub<S: VectorField + ?Sized>(
    sys: &S,
    theta: &[f64],
    radius: f64,
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, CheckError> {
    let balls = BallPair::new(0.0, radius)?;
    let mut ens = run_for(sys, theta, &balls, cfg)?;
    if cfg.sampler.is_none() {
        // Boundedness needs the ball itself, not only its shells.
        let extra = InitialConditionSampler {
            kind: SamplerKind::UniformBall { radius, count: cfg.plan.directions * cfg.plan.radii },
            t0_probes: cfg.plan.t0_probes(cfg.horizon),
            seed: cfg.plan.seed.wrapping_add(1),
        };
        let more = Ensemble::run(sys, theta, &extra, cfg.horizon, &cfg.integrate)?;
        ens.ics.extend(more.ics);
        ens.results.extend(more.results);
    }
    assess_ub(&ens, radius)
}

/// Runs the UAS check for every parameter on the grid and returns all
/// verdicts; the passing entries form the inner approximation of the D-set.
pub fn estimate_dset<S: VectorField + ?Sized>(
    sys: &S,
    balls: BallPair,
    grid: &[Vec<f64>],
    cfg: &CheckConfig,
) -> Result<Vec<(Vec<f64>, StabilityVerdict)>, CheckError> {
    if grid.is_empty() {
        return Err(CheckError::EmptyGrid);
    }
    grid.iter().map(|theta| Ok((theta.clone(), check_uas(sys, theta, balls, cfg)?))).collect()
}

/// Axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBox {
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }
}

/// For each pair of the schedule, ask `oracle` for a parameter and check
/// UAS with it. Holds iff every pair passes.
pub fn check_uspas<S, O>(
    sys: &S,
    oracle: O,
    parameters: Option<&ParameterBox>,
    schedule: &[BallPair],
    cfg: &CheckConfig,
) -> Result<StabilityVerdict, CheckError>
where
    S: VectorField + ?Sized,
    O: Fn(BallPair) -> Vec<f64>,
{
    if schedule.is_empty() {
        return Err(CheckError::EmptyGrid);
    }
    if schedule.windows(2).any(|w| w[1].inner > w[0].inner || w[1].outer < w[0].outer) {
        return Err(CheckError::Schedule);
    }
    let mut rows = Vec::with_capacity(schedule.len());
    for balls in schedule {
        let theta = oracle(*balls);
        if parameters.is_some_and(|p| !p.contains(&theta)) {
            return Err(CheckError::OutsideParameterSet { theta, inner: balls.inner, outer: balls.outer });
        }
        let verdict = check_uas(sys, &theta, *balls, cfg)?;
        rows.push((theta, verdict));
    }
    let first = &rows[0].1;
    let mut v = StabilityVerdict::new(Property::Uspas, None, 0, first.seed, first.t0_probes.clone(), cfg.horizon);
    for (theta, row) in &rows {
        v.samples += row.samples;
        v.failed_samples += row.failed_samples;
        v.schedule.push(ScheduleEntry {
            balls: row.balls.expect("UAS verdicts record their balls"),
            theta: theta.clone(),
            holds: row.holds,
        });
        if !row.holds {
            v.fail(row.status, row.counterexample.clone().expect("failed verdicts carry a counterexample"));
        }
    }
    if v.holds {
        let last = &rows.last().unwrap().1;
        v.witnesses.beta = last.witnesses.beta.clone();
        v.note = Some("witness shown for the last schedule entry".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{linear_decay, FnSystem};

    fn cfg(horizon: f64) -> CheckConfig {
        CheckConfig::new(horizon, 7)
    }

    #[test]
    fn set_distance_cases() {
        assert_eq!(set_distance(&[3.0, 0.0], 1.0), 2.0);
        assert_eq!(set_distance(&[0.5], 1.0), 0.0);
        assert_eq!(set_distance(&[3.0, 4.0], 0.0), 5.0);
    }

    #[test]
    fn ball_pair_validation() {
        assert!(BallPair::new(0.1, 1.0).is_ok());
        assert!(BallPair::new(1.0, 1.0).is_err());
        assert!(BallPair::new(-0.1, 1.0).is_err());
        let global = BallPair::new(0.0, f64::INFINITY).unwrap();
        let text = serde_json::to_string(&global).unwrap();
        assert_eq!(text, r#"{"inner":0.0,"outer":"inf"}"#);
        assert_eq!(serde_json::from_str::<BallPair>(&text).unwrap(), global);
    }

    #[test]
    fn decay_is_us_with_identity_envelope() {
        let sys = linear_decay(vec![1.0], vec![]);
        let v = check_us(&sys, &[], BallPair::new(0.1, 1.0).unwrap(), &cfg(5.0)).unwrap();
        assert!(v.holds);
        let eta = v.witnesses.eta.unwrap();
        // sup |x|_0.1 = |x0| - 0.1 for |x0| > 0.1
        assert!((eta.eval(1.0).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn growth_is_not_us() {
        let sys = FnSystem::new(1, 0, |_t, x, _th, dx| dx[0] = x[0]);
        let v = check_us(&sys, &[], BallPair::new(0.0, 1.0).unwrap(), &cfg(30.0)).unwrap();
        assert!(!v.holds);
        assert!(v.counterexample.is_some());
    }

    #[test]
    fn frozen_state_is_us_not_ua() {
        let sys = FnSystem::new(2, 0, |_t, _x, _th, dx| dx.fill(0.0));
        let balls = BallPair::new(0.1, 1.0).unwrap();
        assert!(check_us(&sys, &[], balls, &cfg(2.0)).unwrap().holds);
        let ua = check_ua(&sys, &[], balls, &cfg(2.0)).unwrap();
        assert!(!ua.holds);
        assert_eq!(ua.status, Status::Falsified);
    }

    #[test]
    fn decay_and_practical_decay_are_ua() {
        let balls = BallPair::new(0.1, 1.0).unwrap();
        let sys = linear_decay(vec![1.0], vec![]);
        assert!(check_ua(&sys, &[], balls, &cfg(15.0)).unwrap().holds);
        let practical = linear_decay(vec![1.0], vec![0.05]);
        let v = check_uas(&practical, &[], balls, &cfg(15.0)).unwrap();
        assert!(v.holds, "{v:?}");
        v.witnesses.beta.unwrap().check_monotone(1.0, 15.0, 50).unwrap();
    }

    #[test]
    fn boundedness_witnesses() {
        let sys = linear_decay(vec![1.0], vec![]);
        let v = check_ub(&sys, &[], 1.0, &cfg(5.0)).unwrap();
        assert!(v.holds);
        assert!(v.witnesses.mu.unwrap() < 1e-9);

        let forced = linear_decay(vec![1.0], vec![1.0]);
        let v = check_ub(&forced, &[], 1.0, &cfg(20.0)).unwrap();
        assert!(v.holds);
        assert!((v.witnesses.mu.unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn dset_of_scaled_decay() {
        let sys = FnSystem::new(1, 1, |_t, x, th, dx| dx[0] = -th[0] * x[0]);
        let grid = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let res = estimate_dset(&sys, BallPair::new(0.01, 1.0).unwrap(), &grid, &cfg(15.0)).unwrap();
        let passing: Vec<f64> = res.iter().filter(|r| r.1.holds).map(|r| r.0[0]).collect();
        assert_eq!(passing, vec![1.0]);
        assert!(matches!(estimate_dset(&sys, BallPair::new(0.0, 1.0).unwrap(), &[], &cfg(1.0)), Err(CheckError::EmptyGrid)));
    }
}
