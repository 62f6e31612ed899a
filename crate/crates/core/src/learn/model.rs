use nalgebra::{DMatrix, DVector};

use super::head::{CostHead, ReconMatrix};
use super::loss::Gradients;
use super::net::TransformNet;
use super::normalize::Normalizer;
use crate::error::{Error, Result};

/// Everything learned offline: lift, cost head, reconstruction matrix and
/// the data normalization they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingModel {
    pub net: TransformNet,
    pub head: CostHead,
    pub recon: ReconMatrix,
    pub normalizer: Normalizer,
    pub config_fingerprint: String,
}

/// Contiguous range of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl LiftingModel {
    pub fn new(net: TransformNet, head: CostHead, recon: ReconMatrix, normalizer: Normalizer, config_fingerprint: String) -> Result<Self> {
        let n_z = net.n_z();
        if head.n_z() != n_z || recon.g.ncols() != n_z {
            return Err(Error::Dimension(format!(
                "lift has n_z = {n_z}, head {} and reconstruction {}",
                head.n_z(),
                recon.g.ncols()
            )));
        }
        if normalizer.n_y() != net.n_y() {
            return Err(Error::Dimension(format!("normalizer has {} outputs, lift {}", normalizer.n_y(), net.n_y())));
        }
        head.validate()?;
        normalizer.validate()?;
        Ok(Self {
            net,
            head,
            recon,
            normalizer,
            config_fingerprint,
        })
    }

    pub fn n_z(&self) -> usize {
        self.net.n_z()
    }

    /// Lift of a physical output vector.
    pub fn lift_physical(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.net.lift(&self.normalizer.y(y))
    }

    /// Surrogate stage value in physical units.
    pub fn predicted_cost(&self, y: &DVector<f64>) -> Result<f64> {
        let z = self.lift_physical(y)?;
        Ok(self.normalizer.c_inverse(self.head.approx_cost(&z)))
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut push = |name: String, len: usize| {
            out.push(ParamGroup { name, start, len });
            start += len;
        };
        for (i, l) in self.net.layers().iter().enumerate() {
            push(format!("net.{i}.w"), l.w.len());
            push(format!("net.{i}.b"), l.b.len());
        }
        push("head.q".into(), self.head.q.len());
        push("head.p".into(), self.head.p.len());
        push("head.b".into(), 1);
        push("recon.g".into(), self.recon.g.len());
        out
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params() + 2 * self.head.q.len() + 1 + self.recon.g.len()
    }

    pub fn params(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in self.net.layers() {
            v.extend_from_slice(l.w.as_slice());
            v.extend_from_slice(l.b.as_slice());
        }
        v.extend_from_slice(self.head.q.as_slice());
        v.extend_from_slice(self.head.p.as_slice());
        v.push(self.head.b);
        v.extend_from_slice(self.recon.g.as_slice());
        DVector::from_vec(v)
    }

    pub fn set_params(&mut self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::Dimension(format!("{} parameters for a model with {}", v.len(), self.n_params())));
        }
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&v.as_slice()[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for l in self.net.layers_mut() {
            take(l.w.as_mut_slice());
            take(l.b.as_mut_slice());
        }
        take(self.head.q.as_mut_slice());
        take(self.head.p.as_mut_slice());
        let mut b = [0.0];
        take(&mut b);
        self.head.b = b[0];
        take(self.recon.g.as_mut_slice());
        Ok(())
    }
}

impl Gradients {
    /// Flattened in the order of [`LiftingModel::params`].
    pub fn flatten(&self) -> DVector<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend_from_slice(l.w.as_slice());
            v.extend_from_slice(l.b.as_slice());
        }
        v.extend_from_slice(self.q.as_slice());
        v.extend_from_slice(self.p.as_slice());
        v.push(self.b);
        v.extend_from_slice(self.g.as_slice());
        DVector::from_vec(v)
    }
}

/// Least-squares reconstruction matrix for the current lift of rows `y_n`
/// (normalized outputs).
pub fn fit_recon(net: &TransformNet, y_n: &DMatrix<f64>, channels: Vec<usize>) -> Result<ReconMatrix> {
    let z = net.lift_batch(y_n)?;
    if let Some(&bad) = channels.iter().find(|&&c| c >= y_n.ncols()) {
        return Err(Error::Dimension(format!("constrained channel {bad} out of range")));
    }
    let yc = y_n.select_columns(&channels);
    ReconMatrix::fit(&z, &yc, channels)
}
