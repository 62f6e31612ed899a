use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the economic stage value is minimized or maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `Q = diag(exp q)`, convex surrogate.
    Cost,
    /// `Q = diag(−exp q)`, concave surrogate.
    Profit,
}

impl Sense {
    pub fn sign(self) -> f64 {
        match self {
            Sense::Cost => 1.0,
            Sense::Profit => -1.0,
        }
    }
}

/// Quadratic surrogate `ĉ(z) = zᵀ Q z + P z + b` with `Q = diag(±exp q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostHead {
    pub sense: Sense,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub b: f64,
}

impl CostHead {
    /// Unit curvature, zero linear term and offset.
    pub fn new(sense: Sense, n_z: usize) -> Self {
        Self {
            sense,
            q: DVector::zeros(n_z),
            p: DVector::zeros(n_z),
            b: 0.0,
        }
    }

    pub fn n_z(&self) -> usize {
        self.q.len()
    }

    /// Diagonal of `Q`; its sign is fixed by `sense` for every finite `q`.
    pub fn q_diag(&self) -> DVector<f64> {
        let s = self.sense.sign();
        self.q.map(|v| s * v.exp())
    }

    pub fn approx_cost(&self, z: &DVector<f64>) -> f64 {
        let qd = self.q_diag();
        z.iter().zip(qd.iter()).map(|(z, q)| q * z * z).sum::<f64>() + self.p.dot(z) + self.b
    }

    /// `ĉ` for every row of `z`.
    pub fn approx_cost_batch(&self, z: &DMatrix<f64>) -> DVector<f64> {
        let qd = self.q_diag();
        DVector::from_fn(z.nrows(), |k, _| {
            let row = z.row(k);
            row.iter().zip(qd.iter()).map(|(z, q)| q * z * z).sum::<f64>() + row.dot(&self.p.transpose()) + self.b
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.q.len() {
            return Err(Error::Shape(format!("head has {} curvature and {} linear entries", self.q.len(), self.p.len())));
        }
        if self.q.iter().chain(self.p.iter()).any(|v| !v.is_finite()) || !self.b.is_finite() {
            return Err(Error::NonFinite("cost head parameters".into()));
        }
        Ok(())
    }
}

/// Linear map `ŷᶜ = G z` from the lifted space back to the constrained output
/// channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconMatrix {
    pub g: DMatrix<f64>,
    /// Indices of the reconstructed output channels.
    pub channels: Vec<usize>,
}

impl ReconMatrix {
    pub fn new(g: DMatrix<f64>, channels: Vec<usize>) -> Result<Self> {
        if g.nrows() != channels.len() {
            return Err(Error::Shape(format!("G has {} rows for {} channels", g.nrows(), channels.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reconstruction matrix".into()));
        }
        Ok(Self { g, channels })
    }

    pub fn n_c(&self) -> usize {
        self.g.nrows()
    }

    pub fn reconstruct(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.g.ncols() {
            return Err(Error::Shape(format!("G expects {} lifted entries, got {}", self.g.ncols(), z.len())));
        }
        Ok(&self.g * z)
    }

    /// Least-squares fit of `G` to rows of `z` and `yᶜ`.
    pub fn fit(z: &DMatrix<f64>, yc: &DMatrix<f64>, channels: Vec<usize>) -> Result<Self> {
        if z.nrows() != yc.nrows() {
            return Err(Error::Dimension(format!("{} lifted rows for {} targets", z.nrows(), yc.nrows())));
        }
        let g = (crate::trajkit::pseudo_inverse(z) * yc).transpose();
        Self::new(g, channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_examples() {
        let z = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(CostHead::new(Sense::Cost, 2).approx_cost(&z), 5.0);
        assert_eq!(CostHead::new(Sense::Profit, 2).approx_cost(&z), -5.0);
        let mut h = CostHead::new(Sense::Cost, 2);
        h.b = 3.5;
        assert_eq!(h.approx_cost(&DVector::zeros(2)), 3.5);
    }

    #[test]
    fn curvature_sign_is_structural() {
        let mut h = CostHead::new(Sense::Profit, 3);
        h.q = DVector::from_vec(vec![-30.0, 0.0, 12.0]);
        assert!(h.q_diag().iter().all(|v| *v < 0.0));
        h.sense = Sense::Cost;
        assert!(h.q_diag().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn recon_examples() {
        let z = DVector::from_vec(vec![1.0, 2.0, 9.0]);
        let zero = ReconMatrix::new(DMatrix::zeros(2, 3), vec![0, 1]).unwrap();
        assert_eq!(zero.reconstruct(&z).unwrap(), DVector::zeros(2));
        let sel = ReconMatrix::new(DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), vec![0, 1]).unwrap();
        assert_eq!(sel.reconstruct(&z).unwrap(), DVector::from_vec(vec![1.0, 2.0]));
        assert!(sel.reconstruct(&DVector::zeros(2)).is_err());
    }
}
