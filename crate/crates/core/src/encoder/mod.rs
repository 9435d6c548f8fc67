//! Miniature bidirectional transformer encoder with exact gradients.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod params;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use config::ModelConfig;
pub use gradcheck::{gradient_check, gradient_check_at_scale, small_check_config, GradCheckReport};
pub use model::{backward, forward, forward_sequence, predict_proba, Head, Mode, Tape};
pub use ops::{cross_entropy, layer_norm, softmax};
pub use params::{LayerParam, Parameters, TensorSpec};
