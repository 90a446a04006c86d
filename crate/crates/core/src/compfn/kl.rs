use serde::{Deserialize, Serialize};

use super::{CompFnError, ComparisonFunction, Result};

/// Bilinear surface over an `(s, t)` grid.
///
/// Beyond the last `s` the last segment is extended linearly; beyond the last
/// `t` the last column is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlGrid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Row `i` holds `beta(s[i], t[j])` for every `j`.
    pub values: Vec<Vec<f64>>,
}

impl KlGrid {
    pub fn sample(beta: &KlBound, s: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let values =
            s.iter().map(|&si| t.iter().map(|&tj| beta.eval(si, tj)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        Ok(Self { s, t, values })
    }

    fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
        if xs.len() == 1 || x <= xs[0] {
            return (0, 0.0);
        }
        let n = xs.len();
        let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
    }

    fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if self.s.is_empty() || self.t.is_empty() {
            return Err(CompFnError::Empty);
        }
        let t = t.min(*self.t.last().unwrap());
        let (i, ws) = Self::bracket(&self.s, s);
        let (j, wt) = Self::bracket(&self.t, t);
        let at = |ii: usize, jj: usize| self.values[ii][jj.min(self.t.len() - 1)];
        let row = |ii: usize| {
            if self.t.len() == 1 {
                at(ii, 0)
            } else {
                at(ii, j) * (1.0 - wt) + at(ii, j + 1) * wt
            }
        };
        if self.s.len() == 1 {
            return Ok(row(0));
        }
        Ok((row(i) * (1.0 - ws) + row(i + 1) * ws).max(0.0))
    }
}

/// Bound of the form `lower⁻¹(upper(s) e^{-k t} + (gain/k)(inner(s,0) e^{-k t/2} + inner(s,t/2))) + inner(s,t)`.
///
/// This is the comparison-lemma bound for an exponentially decaying
/// certificate driven through a gain by a signal bounded by `inner`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDecay {
    pub lower: ComparisonFunction,
    pub upper: ComparisonFunction,
    pub k: f64,
    pub gain: f64,
    pub inner: KlBound,
}

impl ComparisonDecay {
    fn eval(&self, s: f64, t: f64) -> Result<f64> {
        let drive = self.inner.eval(s, 0.0)? * (-0.5 * self.k * t).exp() + self.inner.eval(s, 0.5 * t)?;
        let v = self.upper.eval(s)? * (-self.k * t).exp() + self.gain / self.k * drive;
        Ok(self.lower.invert(v)? + self.inner.eval(s, t)?)
    }
}

/// A two-argument bound `beta(s, t)`: class K in `s`, non-increasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KlBound {
    /// `eta(s) exp(-rate (t - shift))`
    Product {
        eta: ComparisonFunction,
        rate: f64,
        #[serde(default)]
        shift: f64,
    },
    Max {
        terms: Vec<KlBound>,
    },
    Min {
        terms: Vec<KlBound>,
    },
    Sum {
        terms: Vec<KlBound>,
    },
    Scaled {
        factor: f64,
        of: Box<KlBound>,
    },
    /// `min{eta(s), sigma(t)} + eps min(s, 1) exp(-t)`
    MinEnvelope {
        eta: ComparisonFunction,
        sigma: ComparisonFunction,
        eps: f64,
    },
    Grid(KlGrid),
    Comparison(Box<ComparisonDecay>),
}

impl KlBound {
    /// `a s exp(-rate t)`
    pub fn exponential(a: f64, rate: f64) -> Self {
        KlBound::Product { eta: ComparisonFunction::linear(a), rate, shift: 0.0 }
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(CompFnError::NegativeArgument(s));
        }
        if t.is_nan() {
            return Err(CompFnError::NegativeArgument(t));
        }
        Ok(match self {
            KlBound::Product { eta, rate, shift } => eta.eval(s)? * (-rate * (t - shift)).exp(),
            KlBound::Max { terms } => {
                let mut m = 0.0f64;
                for b in terms {
                    m = m.max(b.eval(s, t)?);
                }
                m
            }
            KlBound::Min { terms } => {
                let mut m = f64::INFINITY;
                for b in terms {
                    m = m.min(b.eval(s, t)?);
                }
                m
            }
            KlBound::Sum { terms } => {
                let mut acc = 0.0;
                for b in terms {
                    acc += b.eval(s, t)?;
                }
                acc
            }
            KlBound::Scaled { factor, of } => factor * of.eval(s, t)?,
            KlBound::MinEnvelope { eta, sigma, eps } => eta.eval(s)?.min(sigma.eval(t.max(0.0))?) + eps * s.min(1.0) * (-t).exp(),
            KlBound::Grid(g) => g.eval(s, t)?,
            KlBound::Comparison(c) => c.eval(s, t)?,
        })
    }

    pub fn scaled(self, factor: f64) -> Self {
        KlBound::Scaled { factor, of: Box::new(self) }
    }

    /// Check both monotonicity invariants on an `n x n` grid over
    /// `[0, smax] x [0, tmax]`, returning the first offending point.
    pub fn check_monotone(&self, smax: f64, tmax: f64, n: usize) -> Result<()> {
        let n = n.max(2);
        let ss: Vec<f64> = (0..n).map(|i| smax * i as f64 / (n - 1) as f64).collect();
        let ts: Vec<f64> = (0..n).map(|j| tmax * j as f64 / (n - 1) as f64).collect();
        let table = KlGrid::sample(self, ss.clone(), ts.clone())?;
        for j in 0..n {
            if table.values[0][j] != 0.0 {
                return Err(CompFnError::Invalid(format!("beta(0, {}) = {} is not zero", ts[j], table.values[0][j])));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = table.values[i][j];
                if i + 1 < n && table.values[i + 1][j] < v {
                    return Err(CompFnError::Invalid(format!(
                        "beta decreases in s between ({}, {}) and ({}, {})",
                        ss[i],
                        ts[j],
                        ss[i + 1],
                        ts[j]
                    )));
                }
                if j + 1 < n && table.values[i][j + 1] > v {
                    return Err(CompFnError::Invalid(format!(
                        "beta increases in t between ({}, {}) and ({}, {})",
                        ss[i],
                        ts[j],
                        ss[i],
                        ts[j + 1]
                    )));
                }
            }
        }
        Ok(())
    }
}
