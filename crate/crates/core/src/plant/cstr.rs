//! Two continuous stirred-tank reactors in series.
//!
//! Reactor 1 is fed fresh reactant (`F1`, `C_A10`, `T10`). Reactor 2
//! receives the outflow of reactor 1 plus a second fresh feed (`F2`,
//! `C_A20`, `T20`). Each reactor runs the second-order reaction
//! `A -> B` at rate `k0 exp(-E / (R T)) C_A^2` and has a heat input `Q`.
//!
//! ```text
//! dC_A1/dt = F1/V1 (C_A10 - C_A1) - r1
//! dT1/dt   = F1/V1 (T10 - T1) - dH/(rho Cp) r1 + Q1/(rho Cp V1)
//! dC_A2/dt = (F2 C_A20 + F1 C_A1 - (F1 + F2) C_A2)/V2 - r2
//! dT2/dt   = (F2 T20 + F1 T1 - (F1 + F2) T2)/V2 - dH/(rho Cp) r2 + Q2/(rho Cp V2)
//! ```
//!
//! Parameter values are never built in; they come from the experiment
//! configuration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::bounds::BoxSet;
use crate::error::{Error, Result};

/// Process state `[C_A1, T1, C_A2, T2]` (kmol/m³, K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CstrState {
    pub ca1: f64,
    pub t1: f64,
    pub ca2: f64,
    pub t2: f64,
}

impl CstrState {
    pub fn to_array(self) -> [f64; 4] {
        [self.ca1, self.t1, self.ca2, self.t2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            ca1: a[0],
            t1: a[1],
            ca2: a[2],
            t2: a[3],
        }
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_row_slice(&self.to_array())
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let a: [f64; 4] = v
            .try_into()
            .map_err(|_| Error::Dimension(format!("CSTR state needs 4 entries, got {}", v.len())))?;
        Ok(Self::from_array(a))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Manipulated inputs in vector order `[C_A10, Q1, C_A20, Q2]`
/// (kmol/m³, kJ/h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CstrInput {
    pub ca10: f64,
    pub q1: f64,
    pub ca20: f64,
    pub q2: f64,
}

impl CstrInput {
    pub fn to_array(self) -> [f64; 4] {
        [self.ca10, self.q1, self.ca20, self.q2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            ca10: a[0],
            q1: a[1],
            ca20: a[2],
            q2: a[3],
        }
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_row_slice(&self.to_array())
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let a: [f64; 4] = v
            .try_into()
            .map_err(|_| Error::Dimension(format!("CSTR input needs 4 entries, got {}", v.len())))?;
        Ok(Self::from_array(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CstrParams {
    /// Reactor volumes, m³.
    pub v1: f64,
    pub v2: f64,
    /// Fresh feed flow rates, m³/h.
    pub f1: f64,
    pub f2: f64,
    /// Feed temperatures, K.
    pub t10: f64,
    pub t20: f64,
    /// Pre-exponential factor, m³/(kmol h).
    pub k0: f64,
    /// Activation energy, kJ/kmol.
    pub e: f64,
    /// Gas constant, kJ/(kmol K).
    pub r: f64,
    /// Reaction enthalpy, kJ/kmol (negative for exothermic).
    pub delta_h: f64,
    /// Density, kg/m³.
    pub rho: f64,
    /// Heat capacity, kJ/(kg K).
    pub cp: f64,
}

impl CstrParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v1", self.v1),
            ("v2", self.v2),
            ("f1", self.f1),
            ("f2", self.f2),
            ("t10", self.t10),
            ("t20", self.t20),
            ("k0", self.k0),
            ("r", self.r),
            ("rho", self.rho),
            ("cp", self.cp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("CSTR parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.e >= 0.0 && self.e.is_finite()) || !self.delta_h.is_finite() {
            return Err(Error::Config("CSTR activation energy and enthalpy must be finite, E >= 0".into()));
        }
        Ok(())
    }
}

/// Reaction rate `k0 exp(-E / (R T)) C_A^2`, kmol/(m³ h).
pub fn reaction_rate(conc: f64, temp: f64, p: &CstrParams) -> f64 {
    p.k0 * (-p.e / (p.r * temp)).exp() * conc * conc
}

/// Time derivative of the state, per hour.
pub fn cstr_derivative(x: &CstrState, u: &CstrInput, p: &CstrParams) -> Result<[f64; 4]> {
    if !x.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            detail: format!("non-finite state {x:?}"),
        });
    }
    if x.t1 <= 0.0 || x.t2 <= 0.0 {
        return Err(Error::Diverged {
            step: 0,
            detail: format!("non-physical temperature in {x:?}"),
        });
    }
    let r1 = reaction_rate(x.ca1, x.t1, p);
    let r2 = reaction_rate(x.ca2, x.t2, p);
    let rho_cp = p.rho * p.cp;
    let heat_gain = -p.delta_h / rho_cp;
    let out_flow = p.f1 + p.f2;
    Ok([
        p.f1 / p.v1 * (u.ca10 - x.ca1) - r1,
        p.f1 / p.v1 * (p.t10 - x.t1) + heat_gain * r1 + u.q1 / (rho_cp * p.v1),
        (p.f2 * u.ca20 + p.f1 * x.ca1 - out_flow * x.ca2) / p.v2 - r2,
        (p.f2 * p.t20 + p.f1 * x.t1 - out_flow * x.t2) / p.v2 + heat_gain * r2 + u.q2 / (rho_cp * p.v2),
    ])
}

fn axpy(x: &CstrState, h: f64, k: &[f64; 4]) -> CstrState {
    let a = x.to_array();
    CstrState::from_array([a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]])
}

/// Noise-free fixed-step RK4 integration over `dt` hours.
pub fn integrate(x: &CstrState, u: &CstrInput, p: &CstrParams, dt: f64, substeps: usize) -> Result<CstrState> {
    if substeps == 0 {
        return Err(Error::Config("RK4 needs at least one substep".into()));
    }
    let h = dt / substeps as f64;
    let mut s = *x;
    for _ in 0..substeps {
        let k1 = cstr_derivative(&s, u, p)?;
        let k2 = cstr_derivative(&axpy(&s, 0.5 * h, &k1), u, p)?;
        let k3 = cstr_derivative(&axpy(&s, 0.5 * h, &k2), u, p)?;
        let k4 = cstr_derivative(&axpy(&s, h, &k3), u, p)?;
        let a = s.to_array();
        s = CstrState::from_array(std::array::from_fn(|i| {
            a[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        }));
    }
    if !s.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            detail: "RK4 produced a non-finite state".into(),
        });
    }
    Ok(s)
}

/// Sampled process: integration settings and the admissible input box.
#[derive(Debug, Clone, PartialEq)]
pub struct CstrProcess {
    pub params: CstrParams,
    pub input_bounds: BoxSet,
    pub dt: f64,
    pub substeps: usize,
}

impl CstrProcess {
    pub fn new(params: CstrParams, input_bounds: BoxSet, dt: f64, substeps: usize) -> Result<Self> {
        params.validate()?;
        input_bounds.validate()?;
        if input_bounds.dim() != 4 {
            return Err(Error::Dimension(format!(
                "CSTR input box must have 4 channels, got {}",
                input_bounds.dim()
            )));
        }
        if !(dt >= 0.0 && dt.is_finite()) || substeps == 0 {
            return Err(Error::Config(format!("invalid sampling: dt = {dt}, substeps = {substeps}")));
        }
        Ok(Self {
            params,
            input_bounds,
            dt,
            substeps,
        })
    }

    /// One sampling period: clamp the input to the admissible box, integrate,
    /// add the disturbance draw, and clamp concentrations at zero.
    pub fn step(&self, x: &CstrState, u: &CstrInput, disturbance: &[f64; 4]) -> Result<CstrState> {
        let uv = u.to_vector();
        let u = if self.input_bounds.contains(&uv) {
            *u
        } else {
            log::warn!(
                "input {:?} outside admissible box by {:.3e}; clamping",
                u.to_array(),
                self.input_bounds.violation(&uv)
            );
            CstrInput::from_slice(self.input_bounds.clamp(&uv).as_slice())?
        };
        let next = if self.dt == 0.0 {
            *x
        } else {
            integrate(x, &u, &self.params, self.dt, self.substeps)?
        };
        let a = next.to_array();
        let mut out = CstrState::from_array(std::array::from_fn(|i| a[i] + disturbance[i]));
        out.ca1 = out.ca1.max(0.0);
        out.ca2 = out.ca2.max(0.0);
        if !out.is_finite() {
            return Err(Error::Diverged {
                step: 0,
                detail: "disturbed state is non-finite".into(),
            });
        }
        Ok(out)
    }
}

/// Measured output: the full state.
pub fn output(x: &CstrState) -> DVector<f64> {
    x.to_vector()
}

/// Economic profit `k0 e^{-E/(R T1)} C_A1² + k0 e^{-E/(R T2)} C_A2²`, read
/// from an output vector `[C_A1, T1, C_A2, T2]`.
pub fn stage_profit(_u: &DVector<f64>, y: &DVector<f64>, p: &CstrParams) -> Result<f64> {
    if y.len() != 4 {
        return Err(Error::Dimension(format!("CSTR output needs 4 entries, got {}", y.len())));
    }
    if !(y[1] > 0.0 && y[3] > 0.0) {
        return Err(Error::Domain(format!(
            "profit needs positive temperatures, got T1 = {}, T2 = {}",
            y[1], y[3]
        )));
    }
    Ok(reaction_rate(y[0], y[1], p) + reaction_rate(y[2], y[3], p))
}
