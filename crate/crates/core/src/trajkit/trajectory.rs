use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled input/output/cost record. Row `k` of `inputs` and `outputs` is
/// the sample at step `k`; `costs[k]` is the economic stage value at step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
    costs: DVector<f64>,
    dt: f64,
}

impl Trajectory {
    pub fn new(inputs: DMatrix<f64>, outputs: DMatrix<f64>, costs: DVector<f64>, dt: f64) -> Result<Self> {
        let t = inputs.nrows();
        if t == 0 {
            return Err(Error::Dimension("trajectory must hold at least one sample".into()));
        }
        if outputs.nrows() != t || costs.len() != t {
            return Err(Error::Dimension(format!(
                "trajectory lengths disagree: inputs {t}, outputs {}, costs {}",
                outputs.nrows(),
                costs.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("sampling period must be positive, got {dt}")));
        }
        Ok(Self {
            inputs,
            outputs,
            costs,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_u(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn costs(&self) -> &DVector<f64> {
        &self.costs
    }

    pub fn input(&self, k: usize) -> DVector<f64> {
        self.inputs.row(k).transpose()
    }

    pub fn output(&self, k: usize) -> DVector<f64> {
        self.outputs.row(k).transpose()
    }

    /// Contiguous sub-trajectory `[start, start + len)`.
    pub fn segment(&self, start: usize, len: usize) -> Result<Trajectory> {
        if len == 0 || start + len > self.len() {
            return Err(Error::Dimension(format!(
                "segment [{start}, {}) outside trajectory of length {}",
                start + len,
                self.len()
            )));
        }
        Trajectory::new(
            self.inputs.rows(start, len).into_owned(),
            self.outputs.rows(start, len).into_owned(),
            self.costs.rows(start, len).into_owned(),
            self.dt,
        )
    }

    /// Time-major stacking of the inputs: `[u_0; u_1; ...]`.
    pub fn stacked_inputs(&self) -> DVector<f64> {
        stack_rows(&self.inputs)
    }

    pub fn stacked_outputs(&self) -> DVector<f64> {
        stack_rows(&self.outputs)
    }
}

/// Flattens a samples-by-channels matrix into one column, time-major.
pub fn stack_rows(m: &DMatrix<f64>) -> DVector<f64> {
    let (t, c) = m.shape();
    DVector::from_fn(t * c, |i, _| m[(i / c, i % c)])
}

/// Inverse of [`stack_rows`].
pub fn unstack_rows(v: &DVector<f64>, channels: usize) -> Result<DMatrix<f64>> {
    if channels == 0 || v.len() % channels != 0 {
        return Err(Error::Dimension(format!(
            "cannot split a vector of length {} into blocks of {channels}",
            v.len()
        )));
    }
    let t = v.len() / channels;
    Ok(DMatrix::from_fn(t, channels, |k, c| v[k * channels + c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_lengths() {
        let err = Trajectory::new(DMatrix::zeros(3, 1), DMatrix::zeros(2, 1), DVector::zeros(3), 0.1);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_non_positive_dt() {
        let err = Trajectory::new(DMatrix::zeros(3, 1), DMatrix::zeros(3, 1), DVector::zeros(3), 0.0);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn stacking_is_time_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(stack_rows(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unstack_rows(&stack_rows(&m), 2).unwrap(), m);
    }

    #[test]
    fn segment_slices_all_channels() {
        let tr = Trajectory::new(
            DMatrix::from_fn(5, 1, |i, _| i as f64),
            DMatrix::from_fn(5, 2, |i, j| (10 * i + j) as f64),
            DVector::from_fn(5, |i, _| -(i as f64)),
            0.5,
        )
        .unwrap();
        let seg = tr.segment(2, 2).unwrap();
        assert_eq!(seg.inputs().as_slice(), &[2.0, 3.0]);
        assert_eq!(seg.output(1).as_slice(), &[30.0, 31.0]);
        assert_eq!(seg.costs().as_slice(), &[-2.0, -3.0]);
        assert!(tr.segment(4, 2).is_err());
    }
}
