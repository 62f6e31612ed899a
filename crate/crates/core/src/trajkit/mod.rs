//! Trajectory containers and Hankel-matrix algebra.
//!
//! Signals are stored one sample per row. Hankel matrices stack samples
//! time-major, so block row `i`, column `j` holds sample `i + j` with all of
//! its channels. Every function here is pure.

mod hankel;
mod svd;
mod trajectory;

pub use hankel::{
    build_hankel, build_hankel_from_vectors, is_persistently_exciting, partition_hankel, ExcitationReport,
    HankelBlocks, HankelMatrix,
};
pub use svd::{
    numerical_rank, pseudo_inverse, rank_threshold, reduce_hankel, singular_values, thin_svd, ReducedHankel,
    Retention, ThinSvd, RANK_EPS,
};
pub use trajectory::{stack_rows, unstack_rows, Trajectory};
