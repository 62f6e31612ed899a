use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative factor in the spectral rank criterion
/// `sigma_i > max(rows, cols) * sigma_max * RANK_EPS`.
pub const RANK_EPS: f64 = 1e-12;

/// Thin SVD `M = U diag(s) Vᵀ` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    ThinSvd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]),
        s: DVector::from_fn(order.len(), |i, _| s[order[i]]),
        v_t: DMatrix::from_fn(order.len(), v_t.ncols(), |i, j| v_t[(order[i], j)]),
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(s)
}

/// Singular-value cut-off for a `rows x cols` matrix with largest singular
/// value `sigma_max`.
pub fn rank_threshold(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * sigma_max * RANK_EPS
}

pub fn numerical_rank(sorted_sv: &DVector<f64>, rows: usize, cols: usize) -> usize {
    let Some(&smax) = sorted_sv.iter().next() else {
        return 0;
    };
    let tol = rank_threshold(smax, rows, cols);
    sorted_sv.iter().filter(|&&s| s > tol).count()
}

/// Moore-Penrose pseudo-inverse through the SVD, discarding singular values
/// under the spectral rank threshold.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = thin_svd(m);
    let r = numerical_rank(&svd.s, rows, cols);
    let mut out = DMatrix::zeros(cols, rows);
    for k in 0..r {
        let inv = 1.0 / svd.s[k];
        let v = svd.v_t.row(k);
        let u = svd.u.column(k);
        // out += v_k u_kᵀ / s_k
        out.ger(inv, &v.transpose(), &u, 1.0);
    }
    out
}

/// How many singular directions to keep when reducing a Hankel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    /// Keep everything above the spectral rank threshold.
    Auto,
    /// Keep exactly this many directions.
    Rank(usize),
    /// Keep singular values above `tol * sigma_max`.
    Relative(f64),
}

impl Default for Retention {
    fn default() -> Self {
        Retention::Auto
    }
}

/// `W₁Σ₁` factor of a stacked Hankel matrix plus the matching right factor.
#[derive(Debug, Clone)]
pub struct ReducedHankel {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub right_factor: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

impl ReducedHankel {
    /// `W₁Σ₁V₁ᵀ`, the rank-`n_r` reconstruction of the original matrix.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.matrix * self.right_factor.transpose()
    }
}

pub fn reduce_hankel(stacked: &DMatrix<f64>, retention: Retention) -> Result<ReducedHankel> {
    let (rows, cols) = stacked.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension("cannot reduce an empty matrix".into()));
    }
    let svd = thin_svd(stacked);
    let achievable = numerical_rank(&svd.s, rows, cols);
    let rank = match retention {
        Retention::Auto => achievable,
        Retention::Rank(n) => {
            if n == 0 || n > achievable {
                return Err(Error::Rank {
                    requested: n,
                    achievable,
                });
            }
            n
        }
        Retention::Relative(tol) => {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("relative retention tolerance must be non-negative, got {tol}")));
            }
            let cut = tol * svd.s[0];
            svd.s.iter().take(achievable).filter(|&&s| s > cut).count()
        }
    };
    if rank == 0 {
        return Err(Error::Rank {
            requested: 0,
            achievable,
        });
    }
    let mut matrix = svd.u.columns(0, rank).into_owned();
    for (k, mut col) in matrix.column_iter_mut().enumerate() {
        col *= svd.s[k];
    }
    Ok(ReducedHankel {
        matrix,
        rank,
        right_factor: svd.v_t.rows(0, rank).transpose(),
        singular_values: svd.s.rows(0, rank).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_inverts_to_identity() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!(pseudo_inverse(&i), i, epsilon = 1e-14);
    }

    #[test]
    fn zero_singular_values_stay_zero() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudo_inverse(&m);
        assert_relative_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0])), epsilon = 1e-15);
    }

    #[test]
    fn rank_one_reduction() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let r = reduce_hankel(&m, Retention::Auto).unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.matrix.ncols(), 1);
        assert_relative_eq!(r.reconstruct(), m, epsilon = 1e-12);
    }

    #[test]
    fn lossless_at_full_rank() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, -1.0, 3.0, 2.0, 0.0, 1.0, 5.0]);
        let r = reduce_hankel(&m, Retention::Rank(3)).unwrap();
        assert_relative_eq!(r.reconstruct(), m, epsilon = 1e-10);
        assert!(r.singular_values.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn over_requested_rank_reports_achievable() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match reduce_hankel(&m, Retention::Rank(2)) {
            Err(Error::Rank { requested, achievable }) => {
                assert_eq!((requested, achievable), (2, 1));
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn relative_retention_drops_small_directions() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1.0, 1e-3]));
        assert_eq!(reduce_hankel(&m, Retention::Relative(1e-2)).unwrap().rank, 2);
        assert_eq!(reduce_hankel(&m, Retention::Auto).unwrap().rank, 3);
    }

    #[test]
    fn svd_is_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0]));
        let s = thin_svd(&m);
        assert_eq!(s.s.as_slice(), &[5.0, 3.0, 1.0]);
        let back = &s.u * DMatrix::from_diagonal(&s.s) * &s.v_t;
        assert_relative_eq!(back, m, epsilon = 1e-12);
    }
}
