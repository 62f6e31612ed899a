//! QP assembly for tracking and economic DeePC. Horizon vectors are stacked
//! time-major: entry `j·n + i` is channel `i` at prediction step `j`.

use nalgebra::{DMatrix, DVector};

use super::config::{ControllerConfig, InitWindow};
use crate::error::{Error, Result};
use crate::learn::{CostHead, LiftingModel, Normalizer, ReconMatrix};
use crate::plant::BoxSet;
use crate::qpsolve::{QpProblem, QpSolution, QpStatus};
use crate::trajkit::{stack_rows, HankelBlocks};

/// `I_count ⊗ m`.
pub fn block_diag(m: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(r * count, c * count);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(m);
    }
    out
}

/// `count` stacked copies of `v`.
pub fn repeat(v: &DVector<f64>, count: usize) -> DVector<f64> {
    DVector::from_fn(v.len() * count, |i, _| v[i % v.len()])
}

/// First-difference operator on a stacked horizon: `(D v)_0 = v_0`,
/// `(D v)_j = v_j − v_{j−1}`.
pub fn rate_operator(n_u: usize, n_p: usize) -> DMatrix<f64> {
    let mut d = DMatrix::identity(n_u * n_p, n_u * n_p);
    for j in 1..n_p {
        for i in 0..n_u {
            d[(j * n_u + i, (j - 1) * n_u + i)] = -1.0;
        }
    }
    d
}

/// Horizon weight `Dᵀ (I ⊗ R) D`, so that `Σ_j Δu_jᵀ R Δu_j` with
/// `Δu_0 = u_0 − u_prev` equals `ũᵀ R_big ũ` for `ũ = u − 1 ⊗ u_prev`.
pub fn rate_weight(r: &DMatrix<f64>, n_p: usize) -> DMatrix<f64> {
    let d = rate_operator(r.nrows(), n_p);
    d.transpose() * block_diag(r, n_p) * d
}

fn box_rows(m: &DMatrix<f64>, per_step: &BoxSet, n_p: usize) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    if per_step.dim() * n_p != m.nrows() {
        return Err(Error::Dimension(format!(
            "box of dimension {} does not fit {} predicted rows over {n_p} steps",
            per_step.dim(),
            m.nrows()
        )));
    }
    let lo = (0..m.nrows()).map(|i| per_step.lo[i % per_step.dim()]).collect();
    let hi = (0..m.nrows()).map(|i| per_step.hi[i % per_step.dim()]).collect();
    Ok((m.clone(), lo, hi))
}

fn vstack(parts: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for m in parts {
        out.view_mut((r, 0), (m.nrows(), m.ncols())).copy_from(m);
        r += m.nrows();
    }
    out
}

fn symmetrize(h: &mut DMatrix<f64>) {
    let t = h.transpose();
    *h += t;
    *h *= 0.5;
}

/// Weights, references and optional boxes of the tracking problem, all in
/// the units of the Hankel data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSpec {
    /// Output weight over the horizon, `n_y·N_p` square.
    pub q: DMatrix<f64>,
    /// Input weight over the horizon, `n_u·N_p` square.
    pub r: DMatrix<f64>,
    pub u_ref: DVector<f64>,
    pub y_ref: DVector<f64>,
    pub lambda_g: f64,
    /// Per-step input box.
    pub input_bounds: Option<BoxSet>,
    /// Per-step output box.
    pub output_bounds: Option<BoxSet>,
}

impl TrackingSpec {
    /// Stage weights repeated over the horizon with constant references.
    pub fn constant(q: &DMatrix<f64>, r: &DMatrix<f64>, y_ref: &DVector<f64>, u_ref: &DVector<f64>, n_p: usize) -> Self {
        Self {
            q: block_diag(q, n_p),
            r: block_diag(r, n_p),
            u_ref: repeat(u_ref, n_p),
            y_ref: repeat(y_ref, n_p),
            lambda_g: 0.0,
            input_bounds: None,
            output_bounds: None,
        }
    }
}

/// Tracking DeePC over `g`:
/// `‖Y_f g − y_r‖²_Q + ‖U_f g − u_r‖²_R + λ_g‖g‖²` subject to
/// `U_p g = u_ini`, `Y_p g = y_ini` and the optional boxes on `U_f g`,
/// `Y_f g`.
pub fn build_tracking_qp(blocks: &HankelBlocks, window: &InitWindow, spec: &TrackingSpec) -> Result<QpProblem> {
    let (n_u, n_y, n_p) = (blocks.n_u, blocks.n_z, blocks.n_p);
    if window.t_ini() != blocks.t_ini {
        return Err(Error::Dimension(format!("init window has T_ini = {}, blocks {}", window.t_ini(), blocks.t_ini)));
    }
    if spec.q.shape() != (n_y * n_p, n_y * n_p) || spec.r.shape() != (n_u * n_p, n_u * n_p) {
        return Err(Error::Dimension("tracking weights do not match the horizon".into()));
    }
    if spec.y_ref.len() != n_y * n_p || spec.u_ref.len() != n_u * n_p {
        return Err(Error::Dimension("references must cover N_p steps".into()));
    }
    if !(spec.lambda_g >= 0.0) {
        return Err(Error::Config("lambda_g must be non-negative".into()));
    }
    let u_ini = stack_rows(&window.u_rows()?);
    let y_ini = stack_rows(&window.y_rows()?);
    if u_ini.len() != blocks.u_p.nrows() || y_ini.len() != blocks.z_p.nrows() {
        return Err(Error::Dimension("init window channels do not match the Hankel blocks".into()));
    }
    let n_g = blocks.n_g();
    let qy = &spec.q * &blocks.z_f;
    let ru = &spec.r * &blocks.u_f;
    let mut h = (blocks.z_f.transpose() * &qy + blocks.u_f.transpose() * &ru) * 2.0;
    for i in 0..n_g {
        h[(i, i)] += 2.0 * spec.lambda_g;
    }
    symmetrize(&mut h);
    let f = -(qy.transpose() * &spec.y_ref + ru.transpose() * &spec.u_ref) * 2.0;
    let c0 = spec.y_ref.dot(&(&spec.q * &spec.y_ref)) + spec.u_ref.dot(&(&spec.r * &spec.u_ref));
    let a_eq = vstack(&[&blocks.u_p, &blocks.z_p], n_g);
    let b_eq = DVector::from_iterator(u_ini.len() + y_ini.len(), u_ini.iter().chain(y_ini.iter()).copied());
    let mut rows: Vec<DMatrix<f64>> = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for (m, b) in [(&blocks.u_f, &spec.input_bounds), (&blocks.z_f, &spec.output_bounds)] {
        if let Some(b) = b {
            let (a, l, u) = box_rows(m, b, n_p)?;
            rows.push(a);
            lo.extend(l);
            hi.extend(u);
        }
    }
    let a_box = vstack(&rows.iter().collect::<Vec<_>>(), n_g);
    QpProblem::new(h, f, c0, a_eq, b_eq, a_box, DVector::from_vec(lo), DVector::from_vec(hi))
}

/// The economic problem over `g` (and, in softened form, an initial-condition
/// slack `s`) with every window-independent part assembled once.
///
/// Objective `β Σ_j s_c·ĉ(ẑ_j) + Σ_j Δû_jᵀ R Δû_j + λ_g‖g‖² (+ w‖s‖²)`,
/// where `s_c = +1` for a cost head and `−1` for a profit head, so the
/// quadratic part is always `diag(exp q)` and `H` is PSD.
#[derive(Debug, Clone)]
pub struct EconQp {
    blocks: HankelBlocks,
    h: DMatrix<f64>,
    h_soft: DMatrix<f64>,
    f_const: DVector<f64>,
    /// `U_fᵀ R_big (1 ⊗ I)`: maps `u_prev` to its cross term with `g`.
    rate_cross: DMatrix<f64>,
    r: DMatrix<f64>,
    c0_const: f64,
    a_eq: DMatrix<f64>,
    a_eq_soft: DMatrix<f64>,
    a_box: DMatrix<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
    /// Rows of `a_box` holding the reconstructed outputs, when bounded.
    output_rows: Option<(usize, usize)>,
}

impl EconQp {
    /// `blocks` hold normalized inputs and lifted outputs. `input_bounds` and
    /// `output_bounds` are per-step boxes in the same coordinates (normalized
    /// inputs, normalized constrained outputs).
    pub fn new(
        blocks: HankelBlocks,
        head: &CostHead,
        recon: &ReconMatrix,
        input_bounds: &BoxSet,
        output_bounds: Option<&BoxSet>,
        cfg: &ControllerConfig,
    ) -> Result<Self> {
        let (n_u, n_z, n_p, t_ini) = (blocks.n_u, blocks.n_z, blocks.n_p, blocks.t_ini);
        if head.sense != cfg.sense {
            return Err(Error::Config(format!(
                "controller expects a {:?} head but the model has a {:?} head",
                cfg.sense, head.sense
            )));
        }
        if head.n_z() != n_z || recon.g.ncols() != n_z {
            return Err(Error::Dimension(format!("model has n_z = {} but the blocks carry {n_z}", head.n_z())));
        }
        if t_ini != cfg.t_ini || n_p != cfg.n_p || n_u != cfg.n_u() {
            return Err(Error::Dimension("Hankel blocks do not match the controller horizon".into()));
        }
        let n_g = blocks.n_g();
        let sc = head.sense.sign();
        let curv = head.q_diag().map(|v| sc * v);
        let q_big = DMatrix::from_diagonal(&repeat(&curv, n_p));
        let r_big = rate_weight(&cfg.r, n_p);
        let zq = &q_big * &blocks.z_f;
        let ur = &r_big * &blocks.u_f;
        let mut h = (blocks.z_f.transpose() * zq * cfg.beta + blocks.u_f.transpose() * &ur) * 2.0;
        for i in 0..n_g {
            h[(i, i)] += 2.0 * cfg.lambda_g;
        }
        symmetrize(&mut h);
        let f_const = blocks.z_f.transpose() * repeat(&head.p, n_p) * (cfg.beta * sc);
        let ones = repeat_identity(n_u, n_p);
        let rate_cross = ur.transpose() * ones;
        let c0_const = cfg.beta * sc * head.b * n_p as f64;

        let n_s = n_z * t_ini;
        let mut h_soft = DMatrix::zeros(n_g + n_s, n_g + n_s);
        h_soft.view_mut((0, 0), (n_g, n_g)).copy_from(&h);
        for i in n_g..n_g + n_s {
            h_soft[(i, i)] = 2.0 * cfg.slack_weight;
        }
        let a_eq = vstack(&[&blocks.u_p, &blocks.z_p], n_g);
        let mut a_eq_soft = DMatrix::zeros(a_eq.nrows(), n_g + n_s);
        a_eq_soft.view_mut((0, 0), a_eq.shape()).copy_from(&a_eq);
        for i in 0..n_s {
            a_eq_soft[(n_u * t_ini + i, n_g + i)] = 1.0;
        }

        let (ua, mut lo, mut hi) = box_rows(&blocks.u_f, input_bounds, n_p)?;
        let mut parts = vec![ua];
        let mut output_rows = None;
        if let Some(ob) = output_bounds {
            if ob.dim() != recon.n_c() {
                return Err(Error::Dimension(format!(
                    "output box has {} channels, reconstruction has {}",
                    ob.dim(),
                    recon.n_c()
                )));
            }
            let gz = block_diag(&recon.g, n_p) * &blocks.z_f;
            let (a, l, u) = box_rows(&gz, ob, n_p)?;
            output_rows = Some((parts[0].nrows(), a.nrows()));
            parts.push(a);
            lo.extend(l);
            hi.extend(u);
        }
        let a_box = vstack(&parts.iter().collect::<Vec<_>>(), n_g);
        Ok(Self {
            blocks,
            h,
            h_soft,
            f_const,
            rate_cross,
            r: cfg.r.clone(),
            c0_const,
            a_eq,
            a_eq_soft,
            a_box,
            lo: DVector::from_vec(lo),
            hi: DVector::from_vec(hi),
            output_rows,
        })
    }

    pub fn blocks(&self) -> &HankelBlocks {
        &self.blocks
    }

    pub fn n_g(&self) -> usize {
        self.blocks.n_g()
    }

    /// Instantiates the QP for one window given in controller coordinates:
    /// stacked normalized `u_ini`, stacked lifted `z_ini`, normalized
    /// `u_prev`. With `soft`, `Z_p g + s = z_ini` replaces the hard equality.
    pub fn problem(&self, u_ini: &DVector<f64>, z_ini: &DVector<f64>, u_prev: &DVector<f64>, soft: bool) -> Result<QpProblem> {
        if u_ini.len() != self.blocks.u_p.nrows() || z_ini.len() != self.blocks.z_p.nrows() || u_prev.len() != self.blocks.n_u {
            return Err(Error::Dimension("init window does not match the economic QP".into()));
        }
        let mut f = &self.f_const - &self.rate_cross * u_prev * 2.0;
        let c0 = self.c0_const + u_prev.dot(&(&self.r * u_prev));
        let b_eq = DVector::from_iterator(u_ini.len() + z_ini.len(), u_ini.iter().chain(z_ini.iter()).copied());
        let (h, a_eq, a_box) = if soft {
            let n = self.h_soft.nrows();
            f = f.resize_vertically(n, 0.0);
            let mut a_box = DMatrix::zeros(self.a_box.nrows(), n);
            a_box.view_mut((0, 0), self.a_box.shape()).copy_from(&self.a_box);
            (self.h_soft.clone(), self.a_eq_soft.clone(), a_box)
        } else {
            (self.h.clone(), self.a_eq.clone(), self.a_box.clone())
        };
        QpProblem::new(h, f, c0, a_eq, b_eq, a_box, self.lo.clone(), self.hi.clone())
    }

    /// Largest violation of the output box by `G ẑ` for a solution's `g`
    /// (QP coordinates); `None` without an output box.
    pub fn output_violation(&self, g: &DVector<f64>) -> Option<f64> {
        let (start, len) = self.output_rows?;
        let g = g.rows(0, self.n_g());
        let v = self.a_box.rows(start, len) * g;
        Some(
            (0..len)
                .map(|i| (self.lo[start + i] - v[i]).max(v[i] - self.hi[start + i]).max(0.0))
                .fold(0.0, f64::max),
        )
    }
}

/// `1 ⊗ I_{n_u}`, the stacked horizon of a constant input.
fn repeat_identity(n_u: usize, n_p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_u * n_p, n_u, |r, c| if r % n_u == c { 1.0 } else { 0.0 })
}

/// Window coordinates for the economic QP: stacked normalized inputs, stacked
/// lifted outputs, normalized last input.
pub fn econ_window(model: &LiftingModel, window: &InitWindow) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let norm = &model.normalizer;
    let u = norm.u_rows(&window.u_rows()?);
    let z = model.net.lift_batch(&norm.y_rows(&window.y_rows()?))?;
    Ok((stack_rows(&u), stack_rows(&z), norm.u(&window.u_prev()?)))
}

/// Physical boxes mapped into the model's normalized coordinates.
pub fn normalized_bounds(norm: &Normalizer, recon: &ReconMatrix, cfg: &ControllerConfig) -> (BoxSet, Option<BoxSet>) {
    let u = cfg.input_bounds.affine_image(&norm.u_offset, &norm.u_scale);
    let y = cfg.output_bounds.as_ref().map(|b| {
        let mean: Vec<f64> = recon.channels.iter().map(|&c| norm.y_mean[c]).collect();
        let std: Vec<f64> = recon.channels.iter().map(|&c| norm.y_std[c]).collect();
        b.affine_image(&mean, &std)
    });
    (u, y)
}

/// One-shot economic QP for `window`: `blocks` must already hold normalized
/// inputs and outputs lifted by `model`.
pub fn build_econ_qp(blocks: &HankelBlocks, model: &LiftingModel, window: &InitWindow, cfg: &ControllerConfig) -> Result<QpProblem> {
    cfg.validate()?;
    let (ub, yb) = normalized_bounds(&model.normalizer, &model.recon, cfg);
    let qp = EconQp::new(blocks.clone(), &model.head, &model.recon, &ub, yb.as_ref(), cfg)?;
    let (u_ini, z_ini, u_prev) = econ_window(model, window)?;
    qp.problem(&u_ini, &z_ini, &u_prev, false)
}

/// The optimal input sequence `U_f g*` and its first block clamped to
/// `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPlan {
    /// `N_p × n_u`, one predicted input per row.
    pub sequence: DMatrix<f64>,
    pub first: DVector<f64>,
}

pub fn extract_input(solution: &QpSolution, u_f: &DMatrix<f64>, bounds: &BoxSet) -> Result<InputPlan> {
    if solution.status == QpStatus::Infeasible {
        return Err(Error::Solver(format!(
            "QP infeasible after {} iterations (primal residual {:.3e})",
            solution.iterations, solution.primal_residual
        )));
    }
    let n_u = bounds.dim();
    let n_g = u_f.ncols();
    if solution.x.len() < n_g || n_u == 0 || u_f.nrows() % n_u != 0 {
        return Err(Error::Dimension("solution does not match U_f".into()));
    }
    let g = solution.x.rows(0, n_g);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QP iterate".into()));
    }
    let u = u_f * g;
    let sequence = DMatrix::from_fn(u.len() / n_u, n_u, |r, c| u[r * n_u + c]);
    let first = bounds.clamp(&sequence.row(0).transpose());
    Ok(InputPlan { sequence, first })
}
