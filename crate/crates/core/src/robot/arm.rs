use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RobotError;

pub type Vector<const N: usize> = SVector<f64, N>;
pub type Matrix<const N: usize> = SMatrix<f64, N, N>;

/// Rigid-joint manipulator `D(q) q'' + C(q, q') q' + g(q) = u`.
pub trait Manipulator<const N: usize>: Send + Sync {
    /// Inertia matrix, symmetric positive definite.
    fn inertia(&self, q: &Vector<N>) -> Matrix<N>;
    /// `∂D/∂q_j`.
    fn inertia_partial(&self, q: &Vector<N>, j: usize) -> Matrix<N>;
    /// Coriolis and centrifugal matrix, chosen so that `D' - 2C` is skew-symmetric.
    fn coriolis(&self, q: &Vector<N>, qd: &Vector<N>) -> Matrix<N>;
    fn gravity(&self, q: &Vector<N>) -> Vector<N>;
    /// `∂g/∂q`.
    fn gravity_jacobian(&self, q: &Vector<N>) -> Matrix<N>;
    /// Potential energy with `∂U/∂q = g`.
    fn potential(&self, q: &Vector<N>) -> f64;

    /// `D'(q) = Σ_j ∂D/∂q_j q'_j`.
    fn inertia_rate(&self, q: &Vector<N>, qd: &Vector<N>) -> Matrix<N> {
        (0..N).fold(Matrix::<N>::zeros(), |acc, j| acc + self.inertia_partial(q, j) * qd[j])
    }

    /// `q'' = D⁻¹ (u - C q' - g)`.
    fn acceleration(&self, q: &Vector<N>, qd: &Vector<N>, u: &Vector<N>) -> Result<Vector<N>, RobotError> {
        let rhs = u - self.coriolis(q, qd) * qd - self.gravity(q);
        self.inertia(q).cholesky().map(|c| c.solve(&rhs)).ok_or(RobotError::Singular)
    }

    fn kinetic_energy(&self, q: &Vector<N>, qd: &Vector<N>) -> f64 {
        0.5 * qd.dot(&(self.inertia(q) * qd))
    }
}

/// Planar two-link arm with revolute joints, links modeled as uniform rods.
/// Joint angles are measured from the horizontal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLinkArm {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    /// Distances from each joint to its link's center of mass.
    pub lc1: f64,
    pub lc2: f64,
    /// Link inertias about their centers of mass.
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
}

impl Default for TwoLinkArm {
    fn default() -> Self {
        Self::uniform(1.0, 1.0, 1.0, 1.0, 9.81)
    }
}

impl TwoLinkArm {
    /// Rods of the given masses and lengths with centers of mass at their midpoints.
    pub fn uniform(m1: f64, m2: f64, l1: f64, l2: f64, gravity: f64) -> Self {
        Self { m1, m2, l1, l2, lc1: 0.5 * l1, lc2: 0.5 * l2, i1: m1 * l1 * l1 / 12.0, i2: m2 * l2 * l2 / 12.0, gravity }
    }

    fn coupling(&self) -> f64 {
        self.m2 * self.l1 * self.lc2
    }
}

impl Manipulator<2> for TwoLinkArm {
    fn inertia(&self, q: &Vector<2>) -> Matrix<2> {
        let c2 = q[1].cos();
        let a = self.coupling();
        let d11 = self.m1 * self.lc1.powi(2) + self.m2 * (self.l1.powi(2) + self.lc2.powi(2)) + 2.0 * a * c2 + self.i1 + self.i2;
        let d12 = self.m2 * self.lc2.powi(2) + a * c2 + self.i2;
        let d22 = self.m2 * self.lc2.powi(2) + self.i2;
        Matrix::<2>::new(d11, d12, d12, d22)
    }

    fn inertia_partial(&self, q: &Vector<2>, j: usize) -> Matrix<2> {
        if j == 0 {
            return Matrix::<2>::zeros();
        }
        let h = -self.coupling() * q[1].sin();
        Matrix::<2>::new(2.0 * h, h, h, 0.0)
    }

    fn coriolis(&self, q: &Vector<2>, qd: &Vector<2>) -> Matrix<2> {
        let h = -self.coupling() * q[1].sin();
        Matrix::<2>::new(h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0)
    }

    fn gravity(&self, q: &Vector<2>) -> Vector<2> {
        let g = self.gravity;
        let c12 = (q[0] + q[1]).cos();
        let g2 = self.m2 * self.lc2 * g * c12;
        Vector::<2>::new((self.m1 * self.lc1 + self.m2 * self.l1) * g * q[0].cos() + g2, g2)
    }

    fn gravity_jacobian(&self, q: &Vector<2>) -> Matrix<2> {
        let g = self.gravity;
        let s12 = (q[0] + q[1]).sin();
        let b = -self.m2 * self.lc2 * g * s12;
        let a = -(self.m1 * self.lc1 + self.m2 * self.l1) * g * q[0].sin() + b;
        Matrix::<2>::new(a, b, b, b)
    }

    fn potential(&self, q: &Vector<2>) -> f64 {
        let g = self.gravity;
        (self.m1 * self.lc1 + self.m2 * self.l1) * g * q[0].sin() + self.m2 * self.lc2 * g * (q[0] + q[1]).sin()
    }
}

/// Single rod pendulum about a horizontal axis, angle from the horizontal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
}

impl Pendulum {
    fn inertia_about_pivot(&self) -> f64 {
        self.mass * self.length * self.length / 3.0
    }

    fn moment(&self) -> f64 {
        0.5 * self.mass * self.length * self.gravity
    }
}

impl Manipulator<1> for Pendulum {
    fn inertia(&self, _q: &Vector<1>) -> Matrix<1> {
        Matrix::<1>::new(self.inertia_about_pivot())
    }
    fn inertia_partial(&self, _q: &Vector<1>, _j: usize) -> Matrix<1> {
        Matrix::<1>::zeros()
    }
    fn coriolis(&self, _q: &Vector<1>, _qd: &Vector<1>) -> Matrix<1> {
        Matrix::<1>::zeros()
    }
    fn gravity(&self, q: &Vector<1>) -> Vector<1> {
        Vector::<1>::new(self.moment() * q[0].cos())
    }
    fn gravity_jacobian(&self, q: &Vector<1>) -> Matrix<1> {
        Matrix::<1>::new(-self.moment() * q[0].sin())
    }
    fn potential(&self, q: &Vector<1>) -> f64 {
        self.moment() * q[0].sin()
    }
}

/// Bounds of the standing assumption estimated by sampling:
/// `d_min <= eig(D) <= d_max`, `|C(q, q')| <= k_c |q'|`, `|∂g/∂q| <= k_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub d_min: f64,
    pub d_max: f64,
    pub k_c: f64,
    pub k_g: f64,
    pub samples: usize,
    pub seed: u64,
}

fn dynamic<const N: usize>(m: &Matrix<N>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_column_slice(N, N, m.as_slice())
}

fn spectral_norm<const N: usize>(m: &Matrix<N>) -> f64 {
    dynamic(m).singular_values().max()
}

/// Estimate [`ModelConstants`] from `samples` random configurations with
/// joint angles in `[-π, π]` and unit-norm velocities.
pub fn estimate_constants<const N: usize, M: Manipulator<N>>(model: &M, samples: usize, seed: u64) -> ModelConstants {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut d_min, mut d_max, mut k_c, mut k_g) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let q = Vector::<N>::from_fn(|_, _| rng.random_range(-PI..PI));
        let mut qd = Vector::<N>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = qd.norm();
        if n > 0.0 {
            qd /= n;
        }
        let eig = dynamic(&model.inertia(&q)).symmetric_eigenvalues();
        d_min = d_min.min(eig.min());
        d_max = d_max.max(eig.max());
        k_c = k_c.max(spectral_norm(&model.coriolis(&q, &qd)));
        k_g = k_g.max(spectral_norm(&model.gravity_jacobian(&q)));
    }
    ModelConstants { d_min, d_max, k_c, k_g, samples, seed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(seed: u64) -> (Vector<2>, Vector<2>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (Vector::<2>::from_fn(|_, _| rng.random_range(-3.0..3.0)), Vector::<2>::from_fn(|_, _| rng.random_range(-3.0..3.0)))
    }

    #[test]
    fn inertia_is_positive_definite_and_symmetric() {
        let arm = TwoLinkArm::default();
        for s in 0..200 {
            let (q, _) = probe(s);
            let d = arm.inertia(&q);
            assert_eq!(d[(0, 1)], d[(1, 0)]);
            assert!(d.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let arm = TwoLinkArm::default();
        for s in 0..50 {
            let (q, _) = probe(s);
            let g = arm.gravity(&q);
            for j in 0..2 {
                let h = 1e-6;
                let mut qp = q;
                qp[j] += h;
                let mut qm = q;
                qm[j] -= h;
                let fd = (arm.potential(&qp) - arm.potential(&qm)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-7, "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let arm = TwoLinkArm::default();
        let (q, _) = probe(3);
        for j in 0..2 {
            let h = 1e-6;
            let mut qp = q;
            qp[j] += h;
            let mut qm = q;
            qm[j] -= h;
            let fd = (arm.inertia(&qp) - arm.inertia(&qm)) / (2.0 * h);
            assert!((fd - arm.inertia_partial(&q, j)).norm() < 1e-8);
            let fdg = (arm.gravity(&qp) - arm.gravity(&qm)) / (2.0 * h);
            assert!((fdg - arm.gravity_jacobian(&q).column(j)).norm() < 1e-7);
        }
    }

    #[test]
    fn skew_symmetry_probe() {
        let arm = TwoLinkArm::default();
        for s in 0..500 {
            let (q, qd) = probe(s);
            let n = arm.inertia_rate(&q, &qd) - 2.0 * arm.coriolis(&q, &qd);
            let (x, _) = probe(s + 10_000);
            assert!(x.dot(&(n * x)).abs() <= 1e-9);
        }
    }

    #[test]
    fn gravity_compensation_holds_still() {
        let arm = TwoLinkArm::default();
        let q = Vector::<2>::new(0.4, -1.1);
        let a = arm.acceleration(&q, &Vector::<2>::zeros(), &arm.gravity(&q)).unwrap();
        assert!(a.norm() < 1e-14);
    }

    #[test]
    fn constants_are_consistent() {
        let c = estimate_constants(&TwoLinkArm::default(), 2000, 1);
        assert!(c.d_min > 0.0 && c.d_max > c.d_min);
        assert!(c.k_g > 0.0 && c.k_c > 0.0);
        // Gravity Jacobian norm cannot exceed the sum of the two moment arms.
        assert!(c.k_g <= (1.5 + 0.5) * 9.81 * 2.0);
    }
}
