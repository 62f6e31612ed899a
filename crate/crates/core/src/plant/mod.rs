//! Ground-truth simulators: the series CSTR with clipped Gaussian
//! disturbances and its profit function, plus an LTI sandbox.

mod bounds;
pub mod cstr;
mod lti;
mod noise;
mod sim;

pub use bounds::BoxSet;
pub use cstr::{cstr_derivative, stage_profit, CstrInput, CstrParams, CstrProcess, CstrState};
pub use lti::{lti_step, LtiSystem};
pub use noise::{DisturbanceSource, NoiseConfig};
pub use sim::{CstrPlant, LtiPlant, Plant};
