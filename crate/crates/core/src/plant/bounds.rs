use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `lo <= v <= hi`; entries may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::Domain(format!("empty box in channel {i}: [{l}, {h}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.len() == self.dim() && v.iter().enumerate().all(|(i, &x)| x >= self.lo[i] && x <= self.hi[i])
    }

    /// Largest distance by which `v` leaves the box (zero inside).
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, &x)| (self.lo[i] - x).max(x - self.hi[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn clamp(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i].clamp(self.lo[i], self.hi[i]))
    }

    pub fn midpoint(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| 0.5 * (self.lo[i] + self.hi[i]))
    }

    /// Image of the box under `v -> (v - offset) / scale` with positive scales.
    pub fn affine_image(&self, offset: &[f64], scale: &[f64]) -> BoxSet {
        BoxSet {
            lo: (0..self.dim()).map(|i| (self.lo[i] - offset[i]) / scale[i]).collect(),
            hi: (0..self.dim()).map(|i| (self.hi[i] - offset[i]) / scale[i]).collect(),
        }
    }

    /// Selects a subset of channels.
    pub fn select(&self, channels: &[usize]) -> BoxSet {
        BoxSet {
            lo: channels.iter().map(|&c| self.lo[c]).collect(),
            hi: channels.iter().map(|&c| self.hi[c]).collect(),
        }
    }
}
