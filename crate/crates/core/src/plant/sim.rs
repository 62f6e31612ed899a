use nalgebra::DVector;

use super::bounds::BoxSet;
use super::cstr::{self, CstrInput, CstrProcess, CstrState};
use super::lti::LtiSystem;
use super::noise::DisturbanceSource;
use crate::error::{Error, Result};

/// A sampled plant driven one period at a time.
pub trait Plant: Send {
    fn n_u(&self) -> usize;
    fn n_y(&self) -> usize;
    fn dt(&self) -> f64;
    fn input_bounds(&self) -> &BoxSet;
    fn state(&self) -> DVector<f64>;
    /// Current measured output.
    fn output(&self) -> DVector<f64>;
    /// Applies `u` (clamped to the input box) for one period and returns the
    /// new output.
    fn advance(&mut self, u: &DVector<f64>) -> Result<DVector<f64>>;
    /// Economic stage value `l(u, y)`.
    fn stage_value(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<f64>;
}

/// The series CSTR with an optional disturbance stream.
pub struct CstrPlant {
    process: CstrProcess,
    state: CstrState,
    disturbance: Option<DisturbanceSource>,
    steps: usize,
}

impl CstrPlant {
    pub fn new(process: CstrProcess, initial: CstrState, disturbance: Option<DisturbanceSource>) -> Self {
        Self {
            process,
            state: initial,
            disturbance,
            steps: 0,
        }
    }

    pub fn process(&self) -> &CstrProcess {
        &self.process
    }

    pub fn cstr_state(&self) -> CstrState {
        self.state
    }
}

impl Plant for CstrPlant {
    fn n_u(&self) -> usize {
        4
    }

    fn n_y(&self) -> usize {
        4
    }

    fn dt(&self) -> f64 {
        self.process.dt
    }

    fn input_bounds(&self) -> &BoxSet {
        &self.process.input_bounds
    }

    fn state(&self) -> DVector<f64> {
        self.state.to_vector()
    }

    fn output(&self) -> DVector<f64> {
        cstr::output(&self.state)
    }

    fn advance(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let input = CstrInput::from_slice(u.as_slice())?;
        let d = self.disturbance.as_mut().map(|s| s.draw()).unwrap_or([0.0; 4]);
        self.state = self
            .process
            .step(&self.state, &input, &d)
            .map_err(|e| match e {
                Error::Diverged { detail, .. } => Error::Diverged {
                    step: self.steps,
                    detail,
                },
                other => other,
            })?;
        self.steps += 1;
        Ok(self.output())
    }

    fn stage_value(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        cstr::stage_profit(u, y, &self.process.params)
    }
}

/// Strictly proper LTI sandbox with a quadratic stage cost
/// `Σ w_i (y_i - r_i)²`.
pub struct LtiPlant {
    system: LtiSystem,
    x: DVector<f64>,
    bounds: BoxSet,
    weights: Vec<f64>,
    target: Vec<f64>,
    dt: f64,
}

impl LtiPlant {
    pub fn new(system: LtiSystem, x0: DVector<f64>, bounds: BoxSet, weights: Vec<f64>, target: Vec<f64>, dt: f64) -> Result<Self> {
        if x0.len() != system.n_x() || bounds.dim() != system.n_u() {
            return Err(Error::Dimension("LTI plant: initial state or input box does not match the system".into()));
        }
        if system.d.iter().any(|&v| v != 0.0) {
            return Err(Error::Config("LTI plant must be strictly proper (D = 0)".into()));
        }
        if weights.len() != system.n_y() || target.len() != system.n_y() {
            return Err(Error::Dimension("LTI plant: cost weights/target must have one entry per output".into()));
        }
        Ok(Self {
            system,
            x: x0,
            bounds,
            weights,
            target,
            dt,
        })
    }

    pub fn system(&self) -> &LtiSystem {
        &self.system
    }
}

impl Plant for LtiPlant {
    fn n_u(&self) -> usize {
        self.system.n_u()
    }

    fn n_y(&self) -> usize {
        self.system.n_y()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn input_bounds(&self) -> &BoxSet {
        &self.bounds
    }

    fn state(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn output(&self) -> DVector<f64> {
        &self.system.c * &self.x
    }

    fn advance(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.bounds.clamp(u);
        let (next, _) = self.system.step(&self.x, &u)?;
        self.x = next;
        Ok(self.output())
    }

    fn stage_value(&self, _u: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(y.iter()
            .zip(&self.weights)
            .zip(&self.target)
            .map(|((y, w), r)| w * (y - r).powi(2))
            .sum())
    }
}
