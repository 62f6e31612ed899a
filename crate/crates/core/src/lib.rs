//! Economic data-enabled predictive control.
//!
//! A neural lifting `z = F(y)` is trained offline so that a quadratic form
//! in `z` tracks a nonlinear economic stage cost, a linear map `G` recovers
//! constrained outputs, and lifted trajectories stay consistent with a
//! Hankel-matrix predictor. Online, the controller solves a convex QP over
//! the Hankel coefficients (full order or SVD-reduced) in receding horizon.

pub mod controller;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod plant;
pub mod qpsolve;
pub mod trajkit;

pub use error::{Error, Result};
