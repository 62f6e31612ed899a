use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajkit::{numerical_rank, singular_values};

/// Discrete-time `x⁺ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Shape(format!(
                "non-conformal LTI matrices: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `[B, AB, ..., A^{n-1}B]`.
    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n_x(), self.n_u());
        let mut out = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for k in 0..n {
            out.columns_mut(k * m, m).copy_from(&block);
            block = &self.a * block;
        }
        out
    }

    pub fn is_controllable(&self) -> bool {
        let c = self.controllability_matrix();
        numerical_rank(&singular_values(&c), c.nrows(), c.ncols()) == self.n_x()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        lti_step(self, x, u)
    }

    /// Random system with spectral radius at most `0.9` (via a scaled
    /// random matrix), resampled until `(A, B)` is controllable.
    pub fn random_controllable<R: Rng>(n_x: usize, n_u: usize, n_y: usize, rng: &mut R) -> Self {
        let mut uniform = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        loop {
            let raw = uniform(n_x, n_x);
            let radius = raw.clone().complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
            let a = if radius > 0.0 { raw * (0.9 / radius.max(0.9)) } else { raw };
            let sys = Self {
                a,
                b: uniform(n_x, n_u),
                c: uniform(n_y, n_x),
                d: DMatrix::zeros(n_y, n_u),
            };
            if sys.is_controllable() {
                return sys;
            }
        }
    }
}

pub fn lti_step(sys: &LtiSystem, x: &DVector<f64>, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != sys.n_x() || u.len() != sys.n_u() {
        return Err(Error::Shape(format!(
            "LTI step got x of length {} and u of length {}, expected {} and {}",
            x.len(),
            u.len(),
            sys.n_x(),
            sys.n_u()
        )));
    }
    let next = &sys.a * x + &sys.b * u;
    let y = &sys.c * x + &sys.d * u;
    Ok((next, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> LtiSystem {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        LtiSystem::new(m(a), m(b), m(c), m(d)).unwrap()
    }

    #[test]
    fn identity_dynamics_without_input() {
        let sys = LtiSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.5, -2.0]);
        let (next, _) = sys.step(&x, &DVector::from_vec(vec![3.0])).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn scalar_hand_arithmetic() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0);
        let (next, y) = sys.step(&DVector::from_vec(vec![2.0]), &DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(next[0], 1.0);
        assert_eq!(y[0], 2.0);
    }

    #[test]
    fn superposition_from_rest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = LtiSystem::random_controllable(3, 2, 2, &mut rng);
        let u1: Vec<DVector<f64>> = (0..10).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let u2: Vec<DVector<f64>> = (0..10).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let roll = |us: &[DVector<f64>]| {
            let mut x = DVector::zeros(3);
            let mut ys = Vec::new();
            for u in us {
                let (n, y) = sys.step(&x, u).unwrap();
                ys.push(y);
                x = n;
            }
            ys
        };
        let sum: Vec<_> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let (y1, y2, ys) = (roll(&u1), roll(&u2), roll(&sum));
        for k in 0..10 {
            assert!((&ys[k] - &y1[k] - &y2[k]).amax() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0);
        assert!(sys.step(&DVector::zeros(2), &DVector::zeros(1)).is_err());
        assert!(LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1), DMatrix::zeros(1, 2), DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn random_systems_are_controllable_and_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let sys = LtiSystem::random_controllable(4, 1, 2, &mut rng);
            assert!(sys.is_controllable());
            let radius = sys.a.clone().complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
            assert!(radius <= 0.9 + 1e-9);
        }
    }
}
