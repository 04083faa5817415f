//! Trainable affine-coupling normalizing flow.

pub mod block;
pub mod checkpoint;
pub mod mlp;
pub mod model;
pub mod tensor;
pub mod train;
pub mod transform;

pub use block::{ActNorm, CouplingBlock, S_MAX};
pub use model::{default_hidden_width, FlowModel};
pub use tensor::Tensor;
pub use train::{train, train_with, EpochStats, OptimizerKind, TrainConfig, TrainOutcome};
pub use transform::DataTransform;
