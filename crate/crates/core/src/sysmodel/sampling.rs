use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One ensemble member: initial time and state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub t0: f64,
    pub x0: Vec<f64>,
}

impl InitialCondition {
    pub fn norm(&self) -> f64 {
        self.x0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// Every direction scaled to every radius.
    Shells {
        radii: Vec<f64>,
        directions: usize,
    },
    /// Points uniformly distributed in the ball of the given radius.
    UniformBall {
        radius: f64,
        count: usize,
    },
    Explicit {
        states: Vec<Vec<f64>>,
    },
}

/// Produces the `(t0, x0)` pairs of an ensemble, deterministically from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionSampler {
    pub kind: SamplerKind,
    pub t0_probes: Vec<f64>,
    pub seed: u64,
}

impl InitialConditionSampler {
    /// States first, then initial times: sample `i * probes + j` uses state `i`
    /// and probe `j`.
    pub fn generate(&self, dim: usize) -> Vec<InitialCondition> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let states: Vec<Vec<f64>> = match &self.kind {
            SamplerKind::Shells { radii, directions } => {
                let dirs = sphere_directions(dim, *directions, &mut rng);
                radii.iter().flat_map(|&r| dirs.iter().map(move |d| d.iter().map(|v| v * r).collect())).collect()
            }
            SamplerKind::UniformBall { radius, count } => (0..*count)
                .map(|_| {
                    let d = random_direction(dim, &mut rng);
                    let u: f64 = rng.random();
                    let r = radius * u.powf(1.0 / dim as f64);
                    d.into_iter().map(|v| v * r).collect()
                })
                .collect(),
            SamplerKind::Explicit { states } => states.clone(),
        };
        let probes = if self.t0_probes.is_empty() { vec![0.0] } else { self.t0_probes.clone() };
        states.into_iter().flat_map(|x0| probes.iter().map(move |&t0| InitialCondition { t0, x0: x0.clone() })).collect()
    }
}

fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Unit vectors covering the sphere in `R^dim`.
///
/// Up to four dimensions the set is deterministic: `±1` on the line, equally
/// spaced angles in the plane, a Fibonacci lattice on the 2-sphere and Halton
/// points pushed through Box–Muller in four dimensions. Higher dimensions use
/// seeded Gaussian directions.
pub fn sphere_directions<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        4 => (1..=count as u64)
            .map(|k| {
                let u = [halton(k, 2), halton(k, 3), halton(k, 5), halton(k, 7)];
                let rad1 = (-2.0 * u[0].ln()).sqrt();
                let rad2 = (-2.0 * u[2].ln()).sqrt();
                let g = [
                    rad1 * (2.0 * PI * u[1]).cos(),
                    rad1 * (2.0 * PI * u[1]).sin(),
                    rad2 * (2.0 * PI * u[3]).cos(),
                    rad2 * (2.0 * PI * u[3]).sin(),
                ];
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.iter().map(|v| v / n).collect()
            })
            .collect(),
        _ => (0..count).map(|_| random_direction(dim, rng)).collect(),
    }
}

/// Shell radii, direction count and initial-time probes for a check on `B_Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub directions: usize,
    pub radii: usize,
    /// Smallest radius as a fraction of the largest.
    pub min_radius_fraction: f64,
    /// Initial-time probes as multiples of the horizon.
    pub t0_fractions: Vec<f64>,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            directions: 20,
            radii: 8,
            min_radius_fraction: 1e-2,
            t0_fractions: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 10.0],
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Geometric radii from `min_radius_fraction * max_radius` up to `max_radius`.
    pub fn radii_for(&self, max_radius: f64) -> Vec<f64> {
        let n = self.radii.max(1);
        if n == 1 {
            return vec![max_radius];
        }
        let lo = max_radius * self.min_radius_fraction;
        (0..n).map(|i| lo * (max_radius / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    pub fn t0_probes(&self, horizon: f64) -> Vec<f64> {
        self.t0_fractions.iter().map(|f| f * horizon).collect()
    }

    pub fn sampler(&self, max_radius: f64, horizon: f64) -> InitialConditionSampler {
        InitialConditionSampler {
            kind: SamplerKind::Shells { radii: self.radii_for(max_radius), directions: self.directions },
            t0_probes: self.t0_probes(horizon),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_radius_exact() {
        for dim in 1..=6 {
            let s = InitialConditionSampler {
                kind: SamplerKind::Shells { radii: vec![2.5], directions: 20 },
                t0_probes: vec![0.0],
                seed: 3,
            };
            for ic in s.generate(dim) {
                assert!((ic.norm() - 2.5).abs() <= 1e-12, "dim {dim}: {}", ic.norm());
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = InitialConditionSampler {
            kind: SamplerKind::UniformBall { radius: 1.0, count: 50 },
            t0_probes: vec![0.0, 1.0],
            seed: 42,
        };
        assert_eq!(s.generate(5), s.generate(5));
        let other = InitialConditionSampler { seed: 43, ..s.clone() };
        assert_ne!(s.generate(5), other.generate(5));
        assert!(s.generate(5).iter().all(|ic| ic.norm() <= 1.0));
    }

    #[test]
    fn default_plan_counts() {
        let plan = SamplingPlan::default();
        let r = plan.radii_for(1.0);
        assert_eq!(r.len(), 8);
        assert!((r[0] - 0.01).abs() < 1e-15 && (r[7] - 1.0).abs() < 1e-15);
        assert_eq!(plan.sampler(1.0, 3.0).generate(2).len(), 20 * 8 * 5);
        assert_eq!(plan.t0_probes(3.0), vec![0.0, 1.0, 2.0, 3.0, 30.0]);
    }
}
