use serde::{Deserialize, Serialize};

use crate::compfn::{ComparisonFunction, KlBound};

use super::BallPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "US")]
    Us,
    #[serde(rename = "UA")]
    Ua,
    #[serde(rename = "UAS")]
    Uas,
    #[serde(rename = "UB")]
    Ub,
    #[serde(rename = "USPAS")]
    Uspas,
    /// Domination of sampled data by a synthesized bound.
    #[serde(rename = "BOUND")]
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Not falsified, and witnesses were fitted.
    Holds,
    /// A sampled trajectory violates the property.
    Falsified,
    /// Sampling cannot support the property (for instance an envelope that
    /// does not vanish at the origin).
    InconclusiveUnstable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<ComparisonFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ComparisonFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<KlBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ComparisonFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl Witnesses {
    pub fn is_empty(&self) -> bool {
        self.eta.is_none() && self.sigma.is_none() && self.beta.is_none() && self.gamma.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub t0: f64,
    pub x0: Vec<f64>,
    /// Elapsed time `t - t0` at which the violation was observed.
    pub elapsed: f64,
    /// Amount by which the observed value exceeds what the property allows.
    pub margin: f64,
    pub reason: String,
}

/// One row of a USPAS schedule: the balls, the parameter chosen for them
/// and whether the UAS check passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub balls: BallPair,
    pub theta: Vec<f64>,
    pub holds: bool,
}

/// Outcome of a sampling-based check. `holds == true` means the property was
/// not falsified on the samples and witnesses were fitted; it is never a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub property: Property,
    pub holds: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balls: Option<BallPair>,
    pub samples: usize,
    pub failed_samples: usize,
    pub seed: u64,
    pub t0_probes: Vec<f64>,
    pub horizon: f64,
    pub witnesses: Witnesses,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
    /// Largest observed `value - bound` over all samples (negative when every
    /// sample is strictly dominated).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StabilityVerdict {
    pub(crate) fn new(
        property: Property,
        balls: Option<BallPair>,
        samples: usize,
        seed: u64,
        t0_probes: Vec<f64>,
        horizon: f64,
    ) -> Self {
        Self {
            property,
            holds: true,
            status: Status::Holds,
            balls,
            samples,
            failed_samples: 0,
            seed,
            t0_probes,
            horizon,
            witnesses: Witnesses::default(),
            counterexample: None,
            schedule: Vec::new(),
            max_margin: None,
            note: None,
        }
    }

    pub(crate) fn fail(&mut self, status: Status, cx: Counterexample) {
        self.holds = false;
        self.status = status;
        if self.counterexample.is_none() {
            self.counterexample = Some(cx);
        }
    }
}
