//! Learned lifting: MLP `F_θ`, quadratic cost head, reconstruction matrix,
//! composite loss with exact gradients, Adam training and checkpoints.

mod checkpoint;
mod gradcheck;
mod head;
mod loss;
mod model;
mod net;
mod normalize;
mod train;

pub use checkpoint::{load_model, save_model, SCHEMA_VERSION};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, Probe, REL_ERR_FLOOR};
pub use head::{CostHead, ReconMatrix, Sense};
pub use loss::{loss_econ, loss_linear, loss_recon, Gradients, HankelData, LossBreakdown, WindowSet};
pub use model::{fit_recon, LiftingModel, ParamGroup};
pub use net::{ForwardCache, Layer, TransformNet};
pub use normalize::{NormalizeMode, Normalizer};
pub use train::{init_model, prepare, train, train_from, write_history, Adam, EpochRecord, PreparedData, TrainConfig, TrainOutcome, TrainStatus};
