//! Dense convex QP solver used by the predictive controllers.

mod problem;
mod solver;

pub use problem::{QpProblem, PSD_TOLERANCE};
pub use solver::{solve, QpSettings, QpSolution, QpStatus, QpWorkspace, WarmStart};
