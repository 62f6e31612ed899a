use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Standardize `y` and `c`; scale `u` by its largest magnitude.
    #[default]
    Standard,
    /// Leave data untouched.
    None,
}

/// Per-channel affine maps between physical and training coordinates:
/// `v_n = (v − offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
    pub u_offset: Vec<f64>,
    pub u_scale: Vec<f64>,
    pub c_mean: f64,
    pub c_std: f64,
}

fn floor_scale(s: f64) -> f64 {
    if s > 1e-12 && s.is_finite() {
        s
    } else {
        1.0
    }
}

impl Normalizer {
    pub fn identity(n_u: usize, n_y: usize) -> Self {
        Self {
            y_mean: vec![0.0; n_y],
            y_std: vec![1.0; n_y],
            u_offset: vec![0.0; n_u],
            u_scale: vec![1.0; n_u],
            c_mean: 0.0,
            c_std: 1.0,
        }
    }

    /// Statistics from rows of `u`, `y` and the labels `c`.
    ///
    /// Inputs are scaled but not shifted, which keeps a linear input-output
    /// relation linear after normalization.
    pub fn fit(mode: NormalizeMode, u: &DMatrix<f64>, y: &DMatrix<f64>, c: &DVector<f64>) -> Result<Self> {
        if u.nrows() != y.nrows() || y.nrows() != c.len() || c.is_empty() {
            return Err(Error::Dimension("normalizer needs equally many non-zero u, y and c rows".into()));
        }
        if mode == NormalizeMode::None {
            return Ok(Self::identity(u.ncols(), y.ncols()));
        }
        let n = c.len() as f64;
        let mean_std = |col: Vec<f64>| {
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            (m, floor_scale(v.sqrt()))
        };
        let (y_mean, y_std): (Vec<f64>, Vec<f64>) = (0..y.ncols()).map(|j| mean_std(y.column(j).iter().copied().collect())).unzip();
        let (c_mean, c_std) = mean_std(c.iter().copied().collect());
        let u_scale = (0..u.ncols()).map(|j| floor_scale(u.column(j).amax())).collect();
        Ok(Self {
            y_mean,
            y_std,
            u_offset: vec![0.0; u.ncols()],
            u_scale,
            c_mean,
            c_std,
        })
    }

    pub fn n_u(&self) -> usize {
        self.u_scale.len()
    }

    pub fn n_y(&self) -> usize {
        self.y_std.len()
    }

    pub fn y(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(y.len(), |i, _| (y[i] - self.y_mean[i]) / self.y_std[i])
    }

    pub fn y_rows(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(y.nrows(), y.ncols(), |r, i| (y[(r, i)] - self.y_mean[i]) / self.y_std[i])
    }

    pub fn y_inverse(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(y.len(), |i, _| y[i] * self.y_std[i] + self.y_mean[i])
    }

    pub fn u(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| (u[i] - self.u_offset[i]) / self.u_scale[i])
    }

    pub fn u_rows(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(u.nrows(), u.ncols(), |r, i| (u[(r, i)] - self.u_offset[i]) / self.u_scale[i])
    }

    pub fn u_inverse(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| u[i] * self.u_scale[i] + self.u_offset[i])
    }

    pub fn c(&self, c: f64) -> f64 {
        (c - self.c_mean) / self.c_std
    }

    pub fn c_inverse(&self, c: f64) -> f64 {
        c * self.c_std + self.c_mean
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let pos = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if self.y_mean.len() != self.y_std.len() || self.u_offset.len() != self.u_scale.len() {
            return Err(Error::Shape("normalizer vectors have mismatched lengths".into()));
        }
        if !ok(&self.y_mean) || !ok(&self.u_offset) || !pos(&self.y_std) || !pos(&self.u_scale) || !self.c_mean.is_finite() || !(self.c_std > 0.0) {
            return Err(Error::NonFinite("normalizer statistics".into()));
        }
        Ok(())
    }
}
