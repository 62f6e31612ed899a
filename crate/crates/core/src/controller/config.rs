use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::Sense;
use crate::plant::BoxSet;
use crate::qpsolve::QpSettings;
use crate::trajkit::Retention;

/// Full Hankel coefficients or the SVD-reduced factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    #[default]
    Full,
    Reduced(Retention),
}

/// Settings of the economic controller. Bounds are in physical units; `r`
/// weighs input rates in normalized input units.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub t_ini: usize,
    pub n_p: usize,
    pub input_bounds: BoxSet,
    /// Box on the reconstructed constrained outputs, one entry per channel of
    /// the model's reconstruction matrix.
    pub output_bounds: Option<BoxSet>,
    pub r: DMatrix<f64>,
    pub beta: f64,
    pub lambda_g: f64,
    pub sense: Sense,
    pub order: OrderMode,
    /// Quadratic penalty on the initial-condition slack used right after an
    /// infeasible step.
    pub slack_weight: f64,
    pub qp: QpSettings,
}

impl ControllerConfig {
    /// Defaults for everything but the horizon and the input box.
    pub fn new(t_ini: usize, n_p: usize, input_bounds: BoxSet, sense: Sense) -> Self {
        let n_u = input_bounds.dim();
        Self {
            t_ini,
            n_p,
            input_bounds,
            output_bounds: None,
            r: DMatrix::identity(n_u, n_u),
            beta: 1.0,
            lambda_g: 1e-4,
            sense,
            order: OrderMode::Full,
            slack_weight: 1e4,
            qp: QpSettings::default(),
        }
    }

    pub fn n_u(&self) -> usize {
        self.input_bounds.dim()
    }

    pub fn depth(&self) -> usize {
        self.t_ini + self.n_p
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_ini == 0 || self.n_p == 0 {
            return Err(Error::Config("T_ini and N_p must both be at least 1".into()));
        }
        self.input_bounds.validate()?;
        if self.input_bounds.lo.iter().chain(&self.input_bounds.hi).any(|v| !v.is_finite()) {
            return Err(Error::Config("the input box must be bounded".into()));
        }
        if let Some(b) = &self.output_bounds {
            b.validate()?;
        }
        validate_weight(&self.r, self.n_u(), "R")?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) {
            return Err(Error::Config(format!("lambda_g must be non-negative, got {}", self.lambda_g)));
        }
        if !(self.slack_weight > 0.0 && self.slack_weight.is_finite()) {
            return Err(Error::Config(format!("slack weight must be positive, got {}", self.slack_weight)));
        }
        self.qp.validate()
    }
}

/// Checks that `m` is a symmetric positive-definite `n × n` matrix.
pub(crate) fn validate_weight(m: &DMatrix<f64>, n: usize, name: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::Config(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Config(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// The last `T_ini` applied inputs and the outputs measured just before each
/// of them.
#[derive(Debug, Clone, PartialEq)]
pub struct InitWindow {
    t_ini: usize,
    u: VecDeque<DVector<f64>>,
    y: VecDeque<DVector<f64>>,
}

impl InitWindow {
    pub fn new(t_ini: usize) -> Self {
        Self {
            t_ini,
            u: VecDeque::with_capacity(t_ini + 1),
            y: VecDeque::with_capacity(t_ini + 1),
        }
    }

    /// Builds a full window from `T_ini` rows of inputs and outputs.
    pub fn from_rows(u: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if u.nrows() != y.nrows() || u.nrows() == 0 {
            return Err(Error::Dimension("init window needs equally many non-zero u and y rows".into()));
        }
        let mut w = Self::new(u.nrows());
        for k in 0..u.nrows() {
            w.push(u.row(k).transpose(), y.row(k).transpose());
        }
        Ok(w)
    }

    pub fn t_ini(&self) -> usize {
        self.t_ini
    }

    pub fn is_ready(&self) -> bool {
        self.u.len() == self.t_ini
    }

    /// Appends one `(u_k, y_k)` pair, dropping the oldest once full.
    pub fn push(&mut self, u: DVector<f64>, y: DVector<f64>) {
        if self.u.len() == self.t_ini {
            self.u.pop_front();
            self.y.pop_front();
        }
        self.u.push_back(u);
        self.y.push_back(y);
    }

    fn ready(&self) -> Result<()> {
        if self.is_ready() {
            Ok(())
        } else {
            Err(Error::Dimension(format!("init window holds {} of {} samples", self.u.len(), self.t_ini)))
        }
    }

    /// The most recently applied input.
    pub fn u_prev(&self) -> Result<DVector<f64>> {
        self.ready()?;
        Ok(self.u[self.t_ini - 1].clone())
    }

    /// Inputs as `T_ini` rows.
    pub fn u_rows(&self) -> Result<DMatrix<f64>> {
        self.ready()?;
        Ok(rows(&self.u))
    }

    /// Outputs as `T_ini` rows.
    pub fn y_rows(&self) -> Result<DMatrix<f64>> {
        self.ready()?;
        Ok(rows(&self.y))
    }
}

fn rows(v: &VecDeque<DVector<f64>>) -> DMatrix<f64> {
    DMatrix::from_fn(v.len(), v[0].len(), |r, c| v[r][c])
}
