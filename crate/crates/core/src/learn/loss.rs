//! Composite training loss `α₁ℒ_e + α₂ℒ_re + α₃ℒ_linear` and its exact
//! reverse-mode gradient.
//!
//! All data here is already normalized. Signals are stored one sample per
//! row; windows are concatenated window-major.

use nalgebra::{DMatrix, DVector};

use super::head::{CostHead, ReconMatrix};
use super::model::LiftingModel;
use super::net::{Layer, TransformNet};
use crate::error::{Error, Result};
use crate::trajkit::{build_hankel, pseudo_inverse, stack_rows};

/// The long trajectory used for the Hankel matrices, with the
/// θ-independent input pseudo-inverse precomputed.
#[derive(Debug, Clone)]
pub struct HankelData {
    pub y: DMatrix<f64>,
    pub c: DVector<f64>,
    pub yc: DMatrix<f64>,
    pub depth: usize,
    /// `H_L(u)⁺`, shape `n_g × (n_u·L)`.
    pub pinv_u: DMatrix<f64>,
}

impl HankelData {
    pub fn new(u: &DMatrix<f64>, y: &DMatrix<f64>, c: &DVector<f64>, channels: &[usize], depth: usize) -> Result<Self> {
        if u.nrows() != y.nrows() || y.nrows() != c.len() {
            return Err(Error::Dimension("Hankel trajectory has mismatched lengths".into()));
        }
        let h_u = build_hankel(u, depth)?;
        Ok(Self {
            yc: select_columns(y, channels)?,
            y: y.clone(),
            c: c.clone(),
            depth,
            pinv_u: pseudo_inverse(h_u.data()),
        })
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn n_g(&self) -> usize {
        self.pinv_u.nrows()
    }
}

/// A set of L-step windows with their fixed coefficient vectors
/// `g = H_L(u)⁺ u_L`.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub y: DMatrix<f64>,
    pub c: DVector<f64>,
    pub yc: DMatrix<f64>,
    /// Column `w` is `g` for window `w`.
    pub g: DMatrix<f64>,
    pub len: usize,
}

impl WindowSet {
    /// `windows` holds `(u, y, c)` per window, each with `L` rows.
    pub fn new(hankel: &HankelData, windows: &[(DMatrix<f64>, DMatrix<f64>, DVector<f64>)], channels: &[usize]) -> Result<Self> {
        let l = hankel.depth;
        let count = windows.len();
        let n_y = hankel.y.ncols();
        let n_ul = hankel.pinv_u.ncols();
        let mut y = DMatrix::zeros(count * l, n_y);
        let mut c = DVector::zeros(count * l);
        let mut u_stack = DMatrix::zeros(n_ul, count);
        for (w, (uw, yw, cw)) in windows.iter().enumerate() {
            if uw.nrows() != l || yw.nrows() != l || cw.len() != l || yw.ncols() != n_y || uw.len() != n_ul {
                return Err(Error::Dimension(format!("window {w} does not have {l} conformal rows")));
            }
            y.rows_mut(w * l, l).copy_from(yw);
            c.rows_mut(w * l, l).copy_from(cw);
            u_stack.column_mut(w).copy_from(&stack_rows(uw));
        }
        Ok(Self {
            yc: select_columns(&y, channels)?,
            g: &hankel.pinv_u * u_stack,
            y,
            c,
            len: l,
        })
    }

    pub fn count(&self) -> usize {
        self.g.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let l = self.len;
        let rows: Vec<usize> = idx.iter().flat_map(|&w| (w * l)..(w * l + l)).collect();
        Self {
            y: self.y.select_rows(&rows),
            c: self.c.select_rows(&rows),
            yc: self.yc.select_rows(&rows),
            g: self.g.select_columns(idx),
            len: l,
        }
    }
}

fn select_columns(m: &DMatrix<f64>, channels: &[usize]) -> Result<DMatrix<f64>> {
    if let Some(&bad) = channels.iter().find(|&&c| c >= m.ncols()) {
        return Err(Error::Dimension(format!("constrained channel {bad} out of range for {} outputs", m.ncols())));
    }
    Ok(m.select_columns(channels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub econ: f64,
    pub recon: f64,
    pub linear: f64,
}

/// Gradient record with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub b: f64,
    pub g: DMatrix<f64>,
}

/// Mean squared error between `ĉ(z_k)` and `c_k`.
pub fn loss_econ(head: &CostHead, z: &DMatrix<f64>, c: &DVector<f64>) -> Result<f64> {
    check_batch(z.nrows(), c.len())?;
    let r = head.approx_cost_batch(z) - c;
    Ok(r.norm_squared() / c.len() as f64)
}

/// Mean over rows of `‖yᶜ_k − G z_k‖²`.
pub fn loss_recon(recon: &ReconMatrix, z: &DMatrix<f64>, yc: &DMatrix<f64>) -> Result<f64> {
    check_batch(z.nrows(), yc.nrows())?;
    let e = z * recon.g.transpose() - yc;
    Ok(e.norm_squared() / z.nrows() as f64)
}

/// Mean over windows of `‖z_L − H_L(z_T) g‖²` with the lift applied to
/// both trajectories.
pub fn loss_linear(net: &TransformNet, hankel: &HankelData, windows: &WindowSet) -> Result<f64> {
    check_batch(windows.count(), windows.count().max(1))?;
    let z_t = net.lift_batch(&hankel.y)?;
    let z_w = net.lift_batch(&windows.y)?;
    Ok(linear_terms(&z_t, &z_w, windows, hankel.depth)?.0)
}

fn check_batch(a: usize, b: usize) -> Result<()> {
    if a == 0 || b == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    if a != b {
        return Err(Error::Dimension(format!("batch lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// Returns the loss and the residual matrix `R = Z_L − H_z G_b`
/// (`n_z·L × N`).
fn linear_terms(z_t: &DMatrix<f64>, z_w: &DMatrix<f64>, windows: &WindowSet, depth: usize) -> Result<(f64, DMatrix<f64>)> {
    let n_z = z_t.ncols();
    let h_z = build_hankel(z_t, depth)?;
    if h_z.ncols() != windows.g.nrows() {
        return Err(Error::Dimension(format!(
            "lifted Hankel has {} columns but g has {} entries",
            h_z.ncols(),
            windows.g.nrows()
        )));
    }
    let count = windows.count();
    let mut z_l = DMatrix::zeros(n_z * depth, count);
    for w in 0..count {
        for k in 0..depth {
            z_l.view_mut((k * n_z, w), (n_z, 1)).copy_from(&z_w.row(w * depth + k).transpose());
        }
    }
    let r = z_l - h_z.data() * &windows.g;
    Ok((r.norm_squared() / count as f64, r))
}

impl LiftingModel {
    pub fn evaluate(&self, hankel: &HankelData, windows: &WindowSet, alpha: [f64; 3]) -> Result<LossBreakdown> {
        let z_t = self.net.lift_batch(&hankel.y)?;
        let z_w = self.net.lift_batch(&windows.y)?;
        let econ = loss_econ(&self.head, &z_t, &hankel.c)? + loss_econ(&self.head, &z_w, &windows.c)?;
        let recon = loss_recon(&self.recon, &z_t, &hankel.yc)? + loss_recon(&self.recon, &z_w, &windows.yc)?;
        let linear = linear_terms(&z_t, &z_w, windows, hankel.depth)?.0;
        Ok(breakdown(alpha, econ, recon, linear))
    }

    /// Loss and exact gradients. The Hankel trajectory is re-lifted, and the
    /// gradient of `ℒ_linear` with respect to every lifted Hankel entry is
    /// folded back onto the trajectory rows.
    pub fn loss_and_gradients(&self, hankel: &HankelData, windows: &WindowSet, alpha: [f64; 3]) -> Result<(LossBreakdown, Gradients)> {
        let t = hankel.len();
        let nl = windows.y.nrows();
        if nl == 0 {
            return Err(Error::Dimension("empty batch".into()));
        }
        let n_z = self.net.n_z();
        let depth = hankel.depth;
        let mut y_all = DMatrix::zeros(t + nl, hankel.y.ncols());
        y_all.rows_mut(0, t).copy_from(&hankel.y);
        y_all.rows_mut(t, nl).copy_from(&windows.y);
        let (z_all, cache) = self.net.forward(&y_all)?;
        let z_t = z_all.rows(0, t).into_owned();
        let z_w = z_all.rows(t, nl).into_owned();
        let mut dz = DMatrix::zeros(t + nl, n_z);

        // Economic term.
        let qd = self.head.q_diag();
        let mut gq = DVector::zeros(n_z);
        let mut gp = DVector::zeros(n_z);
        let mut gb = 0.0;
        let mut econ = 0.0;
        for (offset, z, c) in [(0, &z_t, &hankel.c), (t, &z_w, &windows.c)] {
            let n = c.len() as f64;
            let r = self.head.approx_cost_batch(z) - c;
            econ += r.norm_squared() / n;
            for k in 0..z.nrows() {
                let dc = alpha[0] * 2.0 * r[k] / n;
                gb += dc;
                for i in 0..n_z {
                    let zi = z[(k, i)];
                    gq[i] += dc * qd[i] * zi * zi;
                    gp[i] += dc * zi;
                    dz[(offset + k, i)] += dc * (2.0 * qd[i] * zi + self.head.p[i]);
                }
            }
        }

        // Reconstruction term.
        let g = &self.recon.g;
        let mut gg = DMatrix::zeros(g.nrows(), g.ncols());
        let mut recon = 0.0;
        for (offset, z, yc) in [(0, &z_t, &hankel.yc), (t, &z_w, &windows.yc)] {
            let n = z.nrows() as f64;
            let e = z * g.transpose() - yc;
            recon += e.norm_squared() / n;
            let scale = alpha[1] * 2.0 / n;
            gg += e.transpose() * z * scale;
            let dzr = &e * g * scale;
            let mut block = dz.rows_mut(offset, z.nrows());
            block += dzr;
        }

        // Linearity term: ℒ = ‖R‖²/N with R = Z_L − H(Z_T) G_b.
        let (linear, r) = linear_terms(&z_t, &z_w, windows, depth)?;
        let count = windows.count() as f64;
        let scale = alpha[2] * 2.0 / count;
        for w in 0..windows.count() {
            for k in 0..depth {
                for i in 0..n_z {
                    dz[(t + w * depth + k, i)] += scale * r[(k * n_z + i, w)];
                }
            }
        }
        // ∂ℒ/∂H = −(2/N) R G_bᵀ; entry (k·n_z + i, j) of H is Z_T[k + j, i].
        let dh = (&r * windows.g.transpose()) * (-scale);
        for j in 0..dh.ncols() {
            for k in 0..depth {
                for i in 0..n_z {
                    dz[(k + j, i)] += dh[(k * n_z + i, j)];
                }
            }
        }

        if dz.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("loss gradient with respect to the lifted outputs".into()));
        }
        let layers = self.net.backward(&cache, &dz);
        let grads = Gradients {
            layers,
            q: gq,
            p: gp,
            b: gb,
            g: gg,
        };
        Ok((breakdown(alpha, econ, recon, linear), grads))
    }
}

fn breakdown(alpha: [f64; 3], econ: f64, recon: f64, linear: f64) -> LossBreakdown {
    LossBreakdown {
        total: alpha[0] * econ + alpha[1] * recon + alpha[2] * linear,
        econ,
        recon,
        linear,
    }
}
