//! ADMM with over-relaxation and per-row step sizes, followed by an
//! active-set polish on a regularized KKT system.
//!
//! Equality and box rows are stacked into `l <= A x <= u` with `l = u` on the
//! equality rows. Every factorization depends only on `H`, `A` and the step
//! size, so a [`QpWorkspace`] reused across receding-horizon steps keeps them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::problem::{shifted_cholesky, QpProblem};
use crate::error::{Error, Result};
use crate::trajkit::pseudo_inverse;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const EQ_RHO_SCALE: f64 = 1e3;
const MAX_CACHED_FACTORS: usize = 8;
const REFINE_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpSettings {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_comp: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
    pub check_every: usize,
    pub infeasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            tol_comp: 1e-6,
            max_iters: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            polish: true,
            check_every: 10,
            infeasibility_tol: 1e-5,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.tol_primal) && pos(self.tol_dual) && pos(self.tol_comp) && pos(self.rho) && pos(self.sigma))
            || !(self.alpha > 0.0 && self.alpha < 2.0)
            || self.check_every == 0
            || !pos(self.infeasibility_tol)
        {
            return Err(Error::Config(format!("invalid QP settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Solver output. Duals follow `H x + f + A_eqᵀ y_eq + A_boxᵀ y_box = 0`
/// with `y_box > 0` on upper-active and `< 0` on lower-active rows.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub y_box: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    /// max(‖A_eq x − b_eq‖∞, box violation).
    pub primal_residual: f64,
    /// ‖H x + f + Aᵀ y‖∞.
    pub dual_residual: f64,
    pub complementarity: f64,
    pub polished: bool,
}

/// Initial primal/dual iterate. `y` stacks equality then box duals.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub y: Option<DVector<f64>>,
}

impl WarmStart {
    pub fn from_solution(sol: &QpSolution) -> Self {
        let mut y = DVector::zeros(sol.y_eq.len() + sol.y_box.len());
        y.rows_mut(0, sol.y_eq.len()).copy_from(&sol.y_eq);
        y.rows_mut(sol.y_eq.len(), sol.y_box.len()).copy_from(&sol.y_box);
        Self { x: sol.x.clone(), y: Some(y) }
    }
}

/// Residuals of a candidate against the original problem.
#[derive(Debug, Clone, Copy)]
struct Kkt {
    primal: f64,
    dual: f64,
    comp: f64,
}

impl Kkt {
    fn within(&self, s: &QpSettings) -> bool {
        self.primal <= s.tol_primal && self.dual <= s.tol_dual && self.comp <= s.tol_comp
    }

    fn score(&self, s: &QpSettings) -> f64 {
        (self.primal / s.tol_primal).max(self.dual / s.tol_dual).max(self.comp / s.tol_comp)
    }
}

fn kkt(p: &QpProblem, x: &DVector<f64>, y_eq: &DVector<f64>, y_box: &DVector<f64>) -> Kkt {
    let mut grad = &p.h * x + &p.f;
    if p.n_eq() > 0 {
        grad.gemv_tr(1.0, &p.a_eq, y_eq, 1.0);
    }
    let mut comp: f64 = 0.0;
    let mut viol: f64 = 0.0;
    if p.n_box() > 0 {
        grad.gemv_tr(1.0, &p.a_box, y_box, 1.0);
        let ax = &p.a_box * x;
        for i in 0..ax.len() {
            viol = viol.max(p.lo[i] - ax[i]).max(ax[i] - p.hi[i]);
            let c = if y_box[i] > 0.0 {
                y_box[i] * (p.hi[i] - ax[i]).abs()
            } else if y_box[i] < 0.0 {
                -y_box[i] * (ax[i] - p.lo[i]).abs()
            } else {
                0.0
            };
            comp = comp.max(if c.is_nan() { f64::INFINITY } else { c });
        }
    }
    Kkt {
        primal: p.equality_residual(x).max(viol),
        dual: if grad.is_empty() { 0.0 } else { grad.amax() },
        comp,
    }
}

/// Solves one problem with a throwaway workspace.
pub fn solve(problem: &QpProblem, settings: &QpSettings, warm: Option<&WarmStart>) -> Result<QpSolution> {
    QpWorkspace::new().solve(problem, settings, warm)
}

struct PolishFactor {
    shift: f64,
    chol: Cholesky<f64, Dyn>,
    /// `(H + shift I)⁻¹ Aᵀ` for every stacked row.
    w: DMatrix<f64>,
    /// `A (H + shift I)⁻¹ Aᵀ`.
    aw: DMatrix<f64>,
}

/// Reusable factorization cache. Entries are keyed on bitwise equality of
/// `H`, `A_eq` and `A_box`, so constant-Hessian receding-horizon loops pay for
/// each factorization once.
#[derive(Default)]
pub struct QpWorkspace {
    h: Option<DMatrix<f64>>,
    a_eq: Option<DMatrix<f64>>,
    a_box: Option<DMatrix<f64>>,
    a: DMatrix<f64>,
    eq_pinv: Option<DMatrix<f64>>,
    polish: Option<PolishFactor>,
    admm: Vec<(DVector<f64>, f64, Cholesky<f64, Dyn>)>,
    factorizations: usize,
}

impl QpWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of dense factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn sync(&mut self, p: &QpProblem) -> Result<()> {
        let same = self.h.as_ref() == Some(&p.h) && self.a_eq.as_ref() == Some(&p.a_eq) && self.a_box.as_ref() == Some(&p.a_box);
        if same {
            return Ok(());
        }
        let n = p.n();
        let m = p.n_eq() + p.n_box();
        let mut a = DMatrix::zeros(m, n);
        a.rows_mut(0, p.n_eq()).copy_from(&p.a_eq);
        a.rows_mut(p.n_eq(), p.n_box()).copy_from(&p.a_box);
        // Convexity test and polish factor share one shifted Cholesky.
        let shift = p.psd_shift();
        let chol = shifted_cholesky(&p.h, shift)?;
        self.factorizations += 1;
        let w = chol.solve(&a.transpose());
        let aw = &a * &w;
        self.polish = Some(PolishFactor { shift, chol, w, aw });
        self.eq_pinv = if p.n_eq() > 0 { Some(pseudo_inverse(&p.a_eq)) } else { None };
        self.admm.clear();
        self.a = a;
        self.h = Some(p.h.clone());
        self.a_eq = Some(p.a_eq.clone());
        self.a_box = Some(p.a_box.clone());
        Ok(())
    }

    fn admm_factor(&mut self, p: &QpProblem, rho: &DVector<f64>, sigma: f64) -> Result<usize> {
        if let Some(i) = self.admm.iter().position(|(r, sg, _)| r == rho && *sg == sigma) {
            return Ok(i);
        }
        let mut k = p.h.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += sigma;
        }
        let scaled = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |r, c| rho[r] * self.a[(r, c)]);
        k.gemm_tr(1.0, &self.a, &scaled, 1.0);
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Solver("ADMM system matrix is not positive definite".into()))?;
        self.factorizations += 1;
        if self.admm.len() >= MAX_CACHED_FACTORS {
            self.admm.remove(0);
        }
        self.admm.push((rho.clone(), sigma, chol));
        Ok(self.admm.len() - 1)
    }

    pub fn solve(&mut self, p: &QpProblem, s: &QpSettings, warm: Option<&WarmStart>) -> Result<QpSolution> {
        s.validate()?;
        let (n, me, mb) = (p.n(), p.n_eq(), p.n_box());
        let m = me + mb;
        if let Some(w) = warm {
            if w.x.len() != n || w.y.as_ref().is_some_and(|y| y.len() != m) {
                return Err(Error::Problem(format!("warm start has wrong dimensions for n = {n}, m = {m}")));
            }
        }
        self.sync(p)?;

        let finish = |x: DVector<f64>, y: &DVector<f64>, status: QpStatus, iterations: usize, polished: bool| {
            let y_eq = y.rows(0, me).into_owned();
            let y_box = y.rows(me, mb).into_owned();
            let r = kkt(p, &x, &y_eq, &y_box);
            QpSolution {
                objective: p.objective(&x),
                x,
                y_eq,
                y_box,
                status,
                iterations,
                primal_residual: r.primal,
                dual_residual: r.dual,
                complementarity: r.comp,
                polished,
            }
        };

        // Least-squares certificate for an inconsistent equality system.
        if let Some(pinv) = &self.eq_pinv {
            let x_ls = pinv * &p.b_eq;
            let resid = (&p.a_eq * &x_ls - &p.b_eq).norm();
            if resid > 1e-8 * p.b_eq.norm() {
                log::debug!("equality system inconsistent: least-squares residual {resid:.3e}");
                return Ok(finish(x_ls, &DVector::zeros(m), QpStatus::Infeasible, 0, false));
            }
        }

        let mut lo = DVector::zeros(m);
        let mut hi = DVector::zeros(m);
        lo.rows_mut(0, me).copy_from(&p.b_eq);
        hi.rows_mut(0, me).copy_from(&p.b_eq);
        lo.rows_mut(me, mb).copy_from(&p.lo);
        hi.rows_mut(me, mb).copy_from(&p.hi);
        let row_scale = DVector::from_fn(m, |i, _| {
            if lo[i] == hi[i] {
                EQ_RHO_SCALE
            } else if lo[i].is_infinite() && hi[i].is_infinite() {
                RHO_MIN
            } else {
                1.0
            }
        });

        let mut level = quantize(s.rho);
        let rho_of = |level: i32| DVector::from_fn(m, |i, _| (level_value(level) * row_scale[i]).clamp(RHO_MIN, RHO_MAX * EQ_RHO_SCALE));
        let mut rho = rho_of(level);
        let mut fi = self.admm_factor(p, &rho, s.sigma)?;

        let mut x = warm.map(|w| w.x.clone()).unwrap_or_else(|| DVector::zeros(n));
        let mut y = warm.and_then(|w| w.y.clone()).unwrap_or_else(|| DVector::zeros(m));
        let mut z = clip(&(&self.a * &x), &lo, &hi);
        let mut y_prev = y.clone();

        let mut best: Option<(f64, DVector<f64>, DVector<f64>, bool)> = None;
        let mut last_active: Option<Vec<i8>> = None;
        let polish_gate = 1e3 * s.tol_primal.max(s.tol_dual);

        let mut iter = 0;
        while iter < s.max_iters {
            iter += 1;
            // x̃ = (H + σI + AᵀρA)⁻¹ (σx − f + Aᵀ(ρz − y))
            let mut rhs = &x * s.sigma - &p.f;
            if m > 0 {
                let v = rho.component_mul(&z) - &y;
                rhs.gemv_tr(1.0, &self.a, &v, 1.0);
            }
            self.admm[fi].2.solve_mut(&mut rhs);
            let x_tilde = rhs;
            let z_tilde = &self.a * &x_tilde;
            x = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
            let z_relax = &z_tilde * s.alpha + &z * (1.0 - s.alpha);
            y_prev.copy_from(&y);
            let z_new = clip(&(&z_relax + y.component_div(&rho)), &lo, &hi);
            y += rho.component_mul(&(&z_relax - &z_new));
            z = z_new;

            if iter % s.check_every != 0 && iter != s.max_iters {
                continue;
            }
            let ax = &self.a * &x;
            let hx = &p.h * &x;
            let aty = if m > 0 { self.a.tr_mul(&y) } else { DVector::zeros(n) };
            let prim = if m > 0 { (&ax - &z).amax() } else { 0.0 };
            let dual = if n > 0 { (&hx + &p.f + &aty).amax() } else { 0.0 };

            let dy = &y - &y_prev;
            if m > 0 && primal_infeasible(&self.a, &dy, &lo, &hi, s.infeasibility_tol) {
                log::debug!("primal infeasibility certificate at iteration {iter}");
                return Ok(finish(x, &y, QpStatus::Infeasible, iter, false));
            }

            let r = {
                let candidate = finish(x.clone(), &y, QpStatus::MaxIterations, iter, false);
                Kkt {
                    primal: candidate.primal_residual,
                    dual: candidate.dual_residual,
                    comp: candidate.complementarity,
                }
            };
            if best.as_ref().is_none_or(|b| r.score(s) < b.0) {
                best = Some((r.score(s), x.clone(), y.clone(), false));
            }
            if r.within(s) {
                // ADMM meets tolerances only approximately; a successful
                // polish lands on the active constraints exactly.
                if s.polish {
                    let active = active_set(&z, &y, &lo, &hi);
                    if let Some((xp, yp)) = self.polish(p, &x, &y, &active, &lo, &hi) {
                        let cand = finish(xp, &yp, QpStatus::Optimal, iter, true);
                        if cand.primal_residual <= r.primal && cand.dual_residual <= s.tol_dual && cand.complementarity <= s.tol_comp {
                            return Ok(cand);
                        }
                    }
                }
                return Ok(finish(x, &y, QpStatus::Optimal, iter, false));
            }

            if s.polish && prim <= polish_gate && dual <= polish_gate {
                let active = active_set(&z, &y, &lo, &hi);
                if last_active.as_ref() != Some(&active) {
                    if let Some((xp, yp)) = self.polish(p, &x, &y, &active, &lo, &hi) {
                        let cand = finish(xp.clone(), &yp, QpStatus::Optimal, iter, true);
                        let rp = Kkt {
                            primal: cand.primal_residual,
                            dual: cand.dual_residual,
                            comp: cand.complementarity,
                        };
                        if rp.within(s) {
                            return Ok(cand);
                        }
                        if best.as_ref().is_none_or(|b| rp.score(s) < b.0) {
                            best = Some((rp.score(s), xp, yp, true));
                        }
                    }
                    last_active = Some(active);
                }
            }

            if s.adaptive_rho && m > 0 {
                let prim_scale = ax.amax().max(z.amax()).max(1e-12);
                let dual_scale = hx.amax().max(aty.amax()).max(p.f.amax()).max(1e-12);
                let ratio = ((prim / prim_scale) / (dual / dual_scale).max(1e-300)).sqrt();
                if ratio.is_finite() && !(0.2..=5.0).contains(&ratio) {
                    let new_level = quantize(level_value(level) * ratio);
                    if new_level != level {
                        level = new_level;
                        rho = rho_of(level);
                        fi = self.admm_factor(p, &rho, s.sigma)?;
                    }
                }
            }
        }

        let (_, bx, by, polished) = best.unwrap_or((f64::INFINITY, x, y, false));
        Ok(finish(bx, &by, QpStatus::MaxIterations, iter, polished))
    }

    /// Solves the equality-constrained problem on the guessed active set by
    /// iterative refinement against the exact KKT system, using the cached
    /// regularized factor as the preconditioner.
    fn polish(
        &self,
        p: &QpProblem,
        x0: &DVector<f64>,
        y0: &DVector<f64>,
        active: &[i8],
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let pf = self.polish.as_ref()?;
        let rows: Vec<usize> = (0..active.len()).filter(|&i| active[i] != 0).collect();
        let k = rows.len();
        let target = DVector::from_fn(k, |j, _| if active[rows[j]] < 0 { lo[rows[j]] } else { hi[rows[j]] });
        let a_act = self.a.select_rows(&rows);
        let w_act = pf.w.select_columns(&rows);
        let mut schur = DMatrix::from_fn(k, k, |i, j| pf.aw[(rows[i], rows[j])]);
        for i in 0..k {
            schur[(i, i)] += pf.shift;
        }
        let schur = schur.cholesky()?;

        let mut x = x0.clone();
        let mut nu = DVector::from_fn(k, |j, _| y0[rows[j]]);
        for _ in 0..REFINE_STEPS {
            // r1 = −(Hx + f + A_actᵀν), r2 = b − A_act x
            let mut r1 = -(&p.h * &x + &p.f);
            if k > 0 {
                r1.gemv_tr(-1.0, &a_act, &nu, 1.0);
            }
            let r2 = &target - &a_act * &x;
            let err = r1.amax().max(if k > 0 { r2.amax() } else { 0.0 });
            if !err.is_finite() {
                return None;
            }
            if err < 1e-14 * (1.0 + p.f.amax()) {
                break;
            }
            // [H + δI, Aᵀ; A, −δI] [dx; dν] = [r1; r2]
            let h_r1 = pf.chol.solve(&r1);
            let dnu = if k > 0 { schur.solve(&(&a_act * &h_r1 - &r2)) } else { DVector::zeros(0) };
            let dx = if k > 0 { h_r1 - &w_act * &dnu } else { h_r1 };
            x += dx;
            nu += dnu;
        }
        let mut y = DVector::zeros(active.len());
        for (j, &r) in rows.iter().enumerate() {
            y[r] = nu[j];
        }
        Some((x, y))
    }
}

fn quantize(rho: f64) -> i32 {
    (2.0 * rho.clamp(RHO_MIN, RHO_MAX).log10()).round() as i32
}

fn level_value(level: i32) -> f64 {
    10f64.powf(level as f64 / 2.0)
}

fn clip(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].clamp(lo[i], hi[i]))
}

/// `-1` lower-active, `+1` upper-active, `0` inactive; fixed rows count as
/// upper-active.
fn active_set(z: &DVector<f64>, y: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<i8> {
    (0..z.len())
        .map(|i| {
            if lo[i] == hi[i] || (hi[i].is_finite() && hi[i] - z[i] < y[i]) {
                1
            } else if lo[i].is_finite() && z[i] - lo[i] < -y[i] {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// `‖Aᵀδy‖∞ <= ε‖δy‖∞` and `uᵀδy₊ + lᵀδy₋ < −ε‖δy‖∞`.
fn primal_infeasible(a: &DMatrix<f64>, dy: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.amax();
    if norm < 1e-12 {
        return false;
    }
    if a.tr_mul(dy).amax() > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let d = dy[i];
        if d.abs() <= eps * norm * 1e-3 {
            continue;
        }
        let bound = if d > 0.0 { hi[i] } else { lo[i] };
        if !bound.is_finite() {
            return false;
        }
        support += bound * d;
    }
    support < -eps * norm
}
