use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use super::config::{ControllerConfig, InitWindow, OrderMode};
use super::qp::{build_tracking_qp, econ_window, extract_input, normalized_bounds, EconQp, TrackingSpec};
use crate::error::{Error, Result};
use crate::learn::LiftingModel;
use crate::plant::BoxSet;
use crate::qpsolve::{QpSettings, QpSolution, QpStatus, QpWorkspace, WarmStart};
use crate::trajkit::{build_hankel, partition_hankel, reduce_hankel, HankelBlocks};

/// What a policy applies at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Physical input, inside the input box.
    pub input: DVector<f64>,
    pub status: Option<QpStatus>,
    pub iterations: usize,
    /// Optimal QP objective (the predicted negated profit for a profit head).
    pub objective: Option<f64>,
    pub solve_seconds: f64,
    /// True when the previous input was held because the QP failed.
    pub fallback: bool,
    /// Largest violation of the output box by the predicted reconstructed
    /// outputs, for solutions with optimal status.
    pub yc_violation: Option<f64>,
}

impl Decision {
    fn open_loop(input: DVector<f64>) -> Self {
        Self {
            input,
            status: None,
            iterations: 0,
            objective: None,
            solve_seconds: 0.0,
            fallback: false,
            yc_violation: None,
        }
    }
}

pub trait Policy: Send {
    fn label(&self) -> String;
    fn t_ini(&self) -> usize;
    fn decide(&mut self, window: &InitWindow) -> Result<Decision>;
}

/// Applies the same input at every step.
pub struct ConstantPolicy {
    input: DVector<f64>,
    t_ini: usize,
}

impl ConstantPolicy {
    pub fn new(input: DVector<f64>, t_ini: usize) -> Self {
        Self { input, t_ini }
    }
}

impl Policy for ConstantPolicy {
    fn label(&self) -> String {
        "constant".into()
    }

    fn t_ini(&self) -> usize {
        self.t_ini
    }

    fn decide(&mut self, _window: &InitWindow) -> Result<Decision> {
        Ok(Decision::open_loop(self.input.clone()))
    }
}

fn solve_timed(ws: &mut QpWorkspace, p: &crate::qpsolve::QpProblem, s: &QpSettings, warm: Option<&WarmStart>) -> (Result<QpSolution>, f64) {
    let t0 = Instant::now();
    let sol = ws.solve(p, s, warm);
    (sol, t0.elapsed().as_secs_f64())
}

/// Tracking DeePC in the raw units of its Hankel data.
pub struct TrackingDeepc {
    blocks: HankelBlocks,
    spec: TrackingSpec,
    bounds: BoxSet,
    settings: QpSettings,
    workspace: QpWorkspace,
    warm: Option<WarmStart>,
}

impl TrackingDeepc {
    /// `bounds` is the physical input box used to clamp the applied input.
    pub fn new(blocks: HankelBlocks, spec: TrackingSpec, bounds: BoxSet, settings: QpSettings) -> Result<Self> {
        settings.validate()?;
        if bounds.dim() != blocks.n_u {
            return Err(Error::Dimension("input box does not match the Hankel blocks".into()));
        }
        Ok(Self {
            blocks,
            spec,
            bounds,
            settings,
            workspace: QpWorkspace::new(),
            warm: None,
        })
    }

    pub fn blocks(&self) -> &HankelBlocks {
        &self.blocks
    }

    pub fn spec_mut(&mut self) -> &mut TrackingSpec {
        &mut self.spec
    }

    /// Solves the QP for `window` without applying anything.
    pub fn solve(&mut self, window: &InitWindow) -> Result<QpSolution> {
        let p = build_tracking_qp(&self.blocks, window, &self.spec)?;
        let sol = self.workspace.solve(&p, &self.settings, self.warm.as_ref())?;
        self.warm = Some(WarmStart::from_solution(&sol));
        Ok(sol)
    }
}

impl Policy for TrackingDeepc {
    fn label(&self) -> String {
        "tracking".into()
    }

    fn t_ini(&self) -> usize {
        self.blocks.t_ini
    }

    fn decide(&mut self, window: &InitWindow) -> Result<Decision> {
        let p = build_tracking_qp(&self.blocks, window, &self.spec)?;
        let (sol, secs) = solve_timed(&mut self.workspace, &p, &self.settings, self.warm.as_ref());
        let sol = sol?;
        let plan = extract_input(&sol, &self.blocks.u_f, &self.bounds)?;
        self.warm = Some(WarmStart::from_solution(&sol));
        Ok(Decision {
            input: plan.first,
            status: Some(sol.status),
            iterations: sol.iterations,
            objective: Some(sol.objective),
            solve_seconds: secs,
            fallback: false,
            yc_violation: None,
        })
    }
}

/// Economic DeePC on lifted outputs, full order or SVD-reduced.
pub struct EconDeepc {
    model: LiftingModel,
    cfg: ControllerConfig,
    qp: EconQp,
    u_box_n: BoxSet,
    reduced_rank: Option<usize>,
    workspace: QpWorkspace,
    warm: Option<WarmStart>,
    soften: bool,
}

/// Hankel blocks over normalized inputs and lifted normalized outputs.
pub fn lifted_blocks(model: &LiftingModel, u: &DMatrix<f64>, y: &DMatrix<f64>, t_ini: usize, n_p: usize) -> Result<HankelBlocks> {
    let norm = &model.normalizer;
    let z = model.net.lift_batch(&norm.y_rows(y))?;
    let depth = t_ini + n_p;
    partition_hankel(&build_hankel(&norm.u_rows(u), depth)?, &build_hankel(&z, depth)?, t_ini, n_p)
}

/// Replaces the stacked blocks by their rank-`n_r` factor `W₁Σ₁`, returning
/// the reduced blocks and `n_r`.
pub fn reduce_blocks(blocks: &HankelBlocks, order: OrderMode) -> Result<(HankelBlocks, Option<usize>)> {
    match order {
        OrderMode::Full => Ok((blocks.clone(), None)),
        OrderMode::Reduced(retention) => {
            let red = reduce_hankel(&blocks.stacked(), retention)?;
            let b = HankelBlocks::from_stacked(&red.matrix, blocks.n_u, blocks.n_z, blocks.t_ini, blocks.n_p)?;
            Ok((b, Some(red.rank)))
        }
    }
}

impl EconDeepc {
    /// Builds the controller from a physical Hankel trajectory (`u`, `y`
    /// rows).
    pub fn new(model: LiftingModel, u: &DMatrix<f64>, y: &DMatrix<f64>, cfg: ControllerConfig) -> Result<Self> {
        let blocks = lifted_blocks(&model, u, y, cfg.t_ini, cfg.n_p)?;
        Self::from_blocks(model, &blocks, cfg)
    }

    /// `blocks` must hold normalized inputs and lifted outputs at full order;
    /// the configured order mode is applied here.
    pub fn from_blocks(model: LiftingModel, blocks: &HankelBlocks, cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        if model.normalizer.n_u() != cfg.n_u() {
            return Err(Error::Dimension("model and controller disagree on n_u".into()));
        }
        let (blocks, reduced_rank) = reduce_blocks(blocks, cfg.order)?;
        let (u_box_n, y_box_n) = normalized_bounds(&model.normalizer, &model.recon, &cfg);
        let qp = EconQp::new(blocks, &model.head, &model.recon, &u_box_n, y_box_n.as_ref(), &cfg)?;
        Ok(Self {
            model,
            cfg,
            qp,
            u_box_n,
            reduced_rank,
            workspace: QpWorkspace::new(),
            warm: None,
            soften: false,
        })
    }

    pub fn model(&self) -> &LiftingModel {
        &self.model
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn blocks(&self) -> &HankelBlocks {
        self.qp.blocks()
    }

    /// Length of the decision vector `g` (`n_r` when reduced).
    pub fn decision_dim(&self) -> usize {
        self.qp.n_g()
    }

    pub fn reduced_rank(&self) -> Option<usize> {
        self.reduced_rank
    }

    pub fn qp(&self) -> &EconQp {
        &self.qp
    }

    /// Solves the (hard) QP for `window` from an optional warm start, without
    /// touching the controller's own warm-start state.
    pub fn solve_once(&mut self, window: &InitWindow, warm: Option<&WarmStart>) -> Result<QpSolution> {
        let (u_ini, z_ini, u_prev) = econ_window(&self.model, window)?;
        let p = self.qp.problem(&u_ini, &z_ini, &u_prev, false)?;
        self.workspace.solve(&p, &self.cfg.qp, warm)
    }
}

impl Policy for EconDeepc {
    fn label(&self) -> String {
        match self.cfg.order {
            OrderMode::Full => "econ".into(),
            OrderMode::Reduced(_) => "econ-reduced".into(),
        }
    }

    fn t_ini(&self) -> usize {
        self.cfg.t_ini
    }

    fn decide(&mut self, window: &InitWindow) -> Result<Decision> {
        let (u_ini, z_ini, u_prev_n) = econ_window(&self.model, window)?;
        let u_prev = window.u_prev()?;
        let soft = self.soften;
        let p = self.qp.problem(&u_ini, &z_ini, &u_prev_n, soft)?;
        let warm = self.warm.as_ref().filter(|w| w.x.len() == p.n());
        let (sol, secs) = solve_timed(&mut self.workspace, &p, &self.cfg.qp, warm);
        let failed = |reason: String, status: Option<QpStatus>, iterations: usize, this: &mut Self| {
            warn!("holding previous input: {reason}");
            this.soften = true;
            this.warm = None;
            Decision {
                input: this.cfg.input_bounds.clamp(&u_prev),
                status,
                iterations,
                objective: None,
                solve_seconds: secs,
                fallback: true,
                yc_violation: None,
            }
        };
        let sol = match sol {
            Ok(s) => s,
            Err(Error::Solver(msg)) => return Ok(failed(msg, None, 0, self)),
            Err(e) => return Err(e),
        };
        let plan = match extract_input(&sol, &self.qp.blocks().u_f, &self.u_box_n) {
            Ok(plan) => plan,
            Err(Error::Solver(msg)) => return Ok(failed(msg, Some(sol.status), sol.iterations, self)),
            Err(e) => return Err(e),
        };
        if soft {
            debug!("softened initial condition solved with status {:?}", sol.status);
        }
        self.soften = false;
        self.warm = Some(WarmStart::from_solution(&sol));
        let input = self.cfg.input_bounds.clamp(&self.model.normalizer.u_inverse(&plan.first));
        let yc_violation = if sol.status == QpStatus::Optimal {
            self.qp.output_violation(&sol.x)
        } else {
            None
        };
        Ok(Decision {
            input,
            status: Some(sol.status),
            iterations: sol.iterations,
            objective: Some(sol.objective),
            solve_seconds: secs,
            fallback: false,
            yc_violation,
        })
    }
}
