use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::svd::{numerical_rank, singular_values};
use crate::error::{Error, Result};

/// Block Hankel matrix of depth `L` over a `T`-sample signal with `m`
/// channels. Rows are time-major: block row `i` holds all channels of
/// sample `i + j` in column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    data: DMatrix<f64>,
    block_dim: usize,
    depth: usize,
}

impl HankelMatrix {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Block `(i, j)`, i.e. the sample at time `i + j`.
    pub fn block(&self, i: usize, j: usize) -> DVector<f64> {
        self.data.column(j).rows(i * self.block_dim, self.block_dim).into_owned()
    }
}

/// Builds the depth-`depth` Hankel matrix of `seq` (one sample per row).
pub fn build_hankel(seq: &DMatrix<f64>, depth: usize) -> Result<HankelMatrix> {
    let (t, m) = seq.shape();
    if depth == 0 {
        return Err(Error::Dimension("Hankel depth must be at least 1".into()));
    }
    if t < depth {
        return Err(Error::Dimension(format!(
            "signal of length {t} is shorter than Hankel depth {depth}"
        )));
    }
    if m == 0 {
        return Err(Error::Shape("signal has no channels".into()));
    }
    let cols = t - depth + 1;
    let data = DMatrix::from_fn(m * depth, cols, |r, j| seq[(r / m + j, r % m)]);
    Ok(HankelMatrix {
        data,
        block_dim: m,
        depth,
    })
}

/// Same as [`build_hankel`] for a list of sample vectors.
pub fn build_hankel_from_vectors(seq: &[DVector<f64>], depth: usize) -> Result<HankelMatrix> {
    let m = seq.first().map(|v| v.len()).unwrap_or(0);
    if let Some((k, v)) = seq.iter().enumerate().find(|(_, v)| v.len() != m) {
        return Err(Error::Shape(format!(
            "sample {k} has dimension {}, expected {m}",
            v.len()
        )));
    }
    let mat = DMatrix::from_fn(seq.len(), m, |k, c| seq[k][c]);
    build_hankel(&mat, depth)
}

/// Past/future partitions of an input Hankel and an output (or lifted
/// output) Hankel sharing the same columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HankelBlocks {
    pub u_p: DMatrix<f64>,
    pub u_f: DMatrix<f64>,
    pub z_p: DMatrix<f64>,
    pub z_f: DMatrix<f64>,
    pub n_u: usize,
    pub n_z: usize,
    pub t_ini: usize,
    pub n_p: usize,
}

impl HankelBlocks {
    pub fn n_g(&self) -> usize {
        self.u_p.ncols()
    }

    pub fn depth(&self) -> usize {
        self.t_ini + self.n_p
    }

    /// `[U_p; U_f; Z_p; Z_f]`, the stacked input-over-output Hankel.
    pub fn stacked(&self) -> DMatrix<f64> {
        let rows = (self.n_u + self.n_z) * self.depth();
        let mut out = DMatrix::zeros(rows, self.n_g());
        let mut r = 0;
        for block in [&self.u_p, &self.u_f, &self.z_p, &self.z_f] {
            out.rows_mut(r, block.nrows()).copy_from(block);
            r += block.nrows();
        }
        out
    }

    /// Re-partitions a matrix laid out like [`HankelBlocks::stacked`].
    pub fn from_stacked(stacked: &DMatrix<f64>, n_u: usize, n_z: usize, t_ini: usize, n_p: usize) -> Result<Self> {
        let l = t_ini + n_p;
        if stacked.nrows() != (n_u + n_z) * l {
            return Err(Error::Dimension(format!(
                "stacked matrix has {} rows, expected {}",
                stacked.nrows(),
                (n_u + n_z) * l
            )));
        }
        let mut r = 0;
        let mut take = |n: usize| {
            let m = stacked.rows(r, n).into_owned();
            r += n;
            m
        };
        let u_p = take(n_u * t_ini);
        let u_f = take(n_u * n_p);
        let z_p = take(n_z * t_ini);
        let z_f = take(n_z * n_p);
        Ok(Self {
            u_p,
            u_f,
            z_p,
            z_f,
            n_u,
            n_z,
            t_ini,
            n_p,
        })
    }
}

/// Splits depth-`(t_ini + n_p)` Hankel matrices into past and future rows.
pub fn partition_hankel(h_u: &HankelMatrix, h_z: &HankelMatrix, t_ini: usize, n_p: usize) -> Result<HankelBlocks> {
    if t_ini == 0 || n_p == 0 {
        return Err(Error::Dimension("T_ini and N_p must both be positive".into()));
    }
    let l = t_ini + n_p;
    if h_u.depth() != l || h_z.depth() != l {
        return Err(Error::Dimension(format!(
            "Hankel depths ({}, {}) do not equal T_ini + N_p = {l}",
            h_u.depth(),
            h_z.depth()
        )));
    }
    if h_u.ncols() != h_z.ncols() {
        return Err(Error::Dimension(format!(
            "column counts differ: {} vs {}",
            h_u.ncols(),
            h_z.ncols()
        )));
    }
    let (n_u, n_z) = (h_u.block_dim(), h_z.block_dim());
    Ok(HankelBlocks {
        u_p: h_u.data().rows(0, n_u * t_ini).into_owned(),
        u_f: h_u.data().rows(n_u * t_ini, n_u * n_p).into_owned(),
        z_p: h_z.data().rows(0, n_z * t_ini).into_owned(),
        z_f: h_z.data().rows(n_z * t_ini, n_z * n_p).into_owned(),
        n_u,
        n_z,
        t_ini,
        n_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcitationReport {
    pub exciting: bool,
    pub rank: usize,
    pub required: usize,
}

/// Persistent excitation of order `order`: the depth-`order` Hankel matrix
/// of `seq` has full row rank.
pub fn is_persistently_exciting(seq: &DMatrix<f64>, order: usize) -> Result<ExcitationReport> {
    let h = build_hankel(seq, order)?;
    let (rows, cols) = h.data().shape();
    let rank = numerical_rank(&singular_values(h.data()), rows, cols);
    Ok(ExcitationReport {
        exciting: rank == rows,
        rank,
        required: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn scalar_depth_two() {
        let h = build_hankel(&scalars(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(h.data(), &expected);
    }

    #[test]
    fn full_depth_gives_single_column() {
        let seq = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = build_hankel(&seq, 3).unwrap();
        assert_eq!(h.ncols(), 1);
        assert_eq!(h.data().as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn vector_samples_unroll_time_major() {
        let seq = [
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ];
        let h = build_hankel_from_vectors(&seq, 2).unwrap();
        let expected = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(h.data(), &expected);
        assert_eq!(h.block(1, 0).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_hankel(&scalars(&[1.0, 2.0]), 3), Err(Error::Dimension(_))));
        let ragged = [DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0, 2.0])];
        assert!(matches!(build_hankel_from_vectors(&ragged, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn partition_slices_rows() {
        let seq = scalars(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = build_hankel(&seq, 3).unwrap();
        let b = partition_hankel(&h, &h, 1, 2).unwrap();
        assert_eq!(b.u_p, DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(
            b.u_f,
            DMatrix::from_row_slice(2, 4, &[2.0, 3.0, 4.0, 5.0, 3.0, 4.0, 5.0, 6.0])
        );
        let mut restacked = DMatrix::zeros(3, 4);
        restacked.rows_mut(0, 1).copy_from(&b.u_p);
        restacked.rows_mut(1, 2).copy_from(&b.u_f);
        assert_eq!(&restacked, h.data());
    }

    #[test]
    fn partition_case_study_shapes() {
        let u = DMatrix::from_fn(40, 4, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let z = DMatrix::from_fn(40, 10, |i, j| ((i * 5 + j) % 13) as f64);
        let b = partition_hankel(&build_hankel(&u, 7).unwrap(), &build_hankel(&z, 7).unwrap(), 2, 5).unwrap();
        assert_eq!(b.u_p.nrows(), 8);
        assert_eq!(b.u_f.nrows(), 20);
        assert_eq!(b.z_p.nrows(), 20);
        assert_eq!(b.z_f.nrows(), 50);
        let back = HankelBlocks::from_stacked(&b.stacked(), 4, 10, 2, 5).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn partition_rejects_depth_mismatch() {
        let seq = scalars(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h3 = build_hankel(&seq, 3).unwrap();
        assert!(matches!(partition_hankel(&h3, &h3, 1, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn constant_signal_is_not_exciting() {
        let r = is_persistently_exciting(&scalars(&[1.0, 1.0, 1.0, 1.0]), 2).unwrap();
        assert!(!r.exciting);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn pulse_train_is_exciting_of_order_two() {
        // Rows [1,0,0,1,0,...] and [0,0,1,0,0,...] are independent: the
        // second has a one where the first has a zero in column 2.
        let v: Vec<f64> = (0..12).map(|k| if k % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let r = is_persistently_exciting(&scalars(&v), 2).unwrap();
        assert!(r.exciting);
        assert_eq!(r.rank, 2);
    }
}
