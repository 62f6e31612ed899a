use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative slack allowed on the smallest eigenvalue of `H`.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// `min ½ xᵀHx + fᵀx + c0  s.t.  A_eq x = b_eq,  lo <= A_box x <= hi`.
///
/// Box bounds may be infinite. `H` must be symmetric positive semidefinite up
/// to round-off; convexity is verified by the solver (once per distinct `H`
/// when a [`super::QpWorkspace`] is reused).
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub c0: f64,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_box: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl QpProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        c0: f64,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_box: DMatrix<f64>,
        lo: DVector<f64>,
        hi: DVector<f64>,
    ) -> Result<Self> {
        let n = f.len();
        if h.shape() != (n, n) {
            return Err(Error::Problem(format!("H is {:?}, expected {n}x{n}", h.shape())));
        }
        if a_eq.ncols() != n || a_eq.nrows() != b_eq.len() {
            return Err(Error::Problem(format!(
                "equality system is {:?} with {} right-hand sides, expected {n} columns",
                a_eq.shape(),
                b_eq.len()
            )));
        }
        if a_box.ncols() != n || a_box.nrows() != lo.len() || lo.len() != hi.len() {
            return Err(Error::Problem(format!(
                "box system is {:?} with bounds of length {}/{}",
                a_box.shape(),
                lo.len(),
                hi.len()
            )));
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(h.as_slice()) || !finite(f.as_slice()) || !c0.is_finite() || !finite(a_eq.as_slice())
            || !finite(b_eq.as_slice()) || !finite(a_box.as_slice())
        {
            return Err(Error::Problem("problem data must be finite".into()));
        }
        for i in 0..lo.len() {
            if lo[i].is_nan() || hi[i].is_nan() || lo[i] > hi[i] {
                return Err(Error::Problem(format!("box row {i} has lo {} > hi {}", lo[i], hi[i])));
            }
        }
        let scale = h.amax().max(1.0);
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Problem(format!("H is not symmetric (max asymmetry {asym:.3e})")));
        }
        Ok(Self {
            h,
            f,
            c0,
            a_eq,
            b_eq,
            a_box,
            lo,
            hi,
        })
    }

    /// Unconstrained problem with no rows.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>, c0: f64) -> Result<Self> {
        let n = f.len();
        Self::new(
            h,
            f,
            c0,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::zeros(0),
        )
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn n_box(&self) -> usize {
        self.lo.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x) + self.c0
    }

    /// Diagonal shift used by the convexity test: `PSD_TOLERANCE·‖H‖_F`,
    /// floored so that `H = 0` still factorizes.
    pub fn psd_shift(&self) -> f64 {
        (PSD_TOLERANCE * self.h.norm()).max(1e-12)
    }

    /// Checks `λ_min(H) >= -PSD_TOLERANCE·‖H‖` with a shifted Cholesky.
    pub fn check_convexity(&self) -> Result<()> {
        shifted_cholesky(&self.h, self.psd_shift()).map(|_| ())
    }

    /// Largest violation of the equality rows (∞-norm).
    pub fn equality_residual(&self, x: &DVector<f64>) -> f64 {
        if self.n_eq() == 0 {
            return 0.0;
        }
        (&self.a_eq * x - &self.b_eq).amax()
    }

    /// Largest violation of the box rows.
    pub fn box_violation(&self, x: &DVector<f64>) -> f64 {
        if self.n_box() == 0 {
            return 0.0;
        }
        let ax = &self.a_box * x;
        (0..ax.len())
            .map(|i| (self.lo[i] - ax[i]).max(ax[i] - self.hi[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn shifted_cholesky(h: &DMatrix<f64>, shift: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut shifted = h.clone();
    for i in 0..h.nrows() {
        shifted[(i, i)] += shift;
    }
    shifted
        .cholesky()
        .ok_or_else(|| Error::Problem("H is not positive semidefinite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_inverted_bounds() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QpProblem::unconstrained(h, DVector::zeros(2), 0.0).is_err());
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            0.0,
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.0]),
        );
        assert!(p.is_err());
    }

    #[test]
    fn convexity_check() {
        let good = QpProblem::unconstrained(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), DVector::zeros(2), 0.0).unwrap();
        assert!(good.check_convexity().is_ok());
        let bad = QpProblem::unconstrained(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]), DVector::zeros(2), 0.0).unwrap();
        assert!(bad.check_convexity().is_err());
    }
}
