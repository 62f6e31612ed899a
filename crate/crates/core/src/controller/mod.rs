//! Receding-horizon DeePC: tracking on raw outputs, economic on lifted
//! outputs (full order or SVD-reduced), and the closed-loop harness.

mod config;
mod policy;
mod qp;
mod sim;

pub use config::{ControllerConfig, InitWindow, OrderMode};
pub use policy::{lifted_blocks, reduce_blocks, ConstantPolicy, Decision, EconDeepc, Policy, TrackingDeepc};
pub use qp::{
    block_diag, build_econ_qp, build_tracking_qp, econ_window, extract_input, normalized_bounds, rate_operator, rate_weight, repeat,
    EconQp, InputPlan, TrackingSpec,
};
pub use sim::{closed_loop, status_str, SimResult, StepRecord};
