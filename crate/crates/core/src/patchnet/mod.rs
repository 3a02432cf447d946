//! The neural patch estimator: quaternion spatial transformer, residual
//! dynamic-graph edge convolutions, multi-head attention aggregation and
//! three planar experts under a softmax gate, with a reverse-mode gradient
//! engine, an Adam trainer, and the `STNW` weights container.

pub mod mat;
pub mod network;
pub mod params;
mod predict;
pub mod tape;
pub mod train;
pub mod weights;

pub use mat::Mat;
pub use network::ForwardMode;
pub use params::{AttentionScale, NetConfig, NetworkParams};
pub use predict::{patch_loss, PatchNet, PatchPrediction};
pub use train::{
    sample_training_patches, train, AdamState, TrainConfig, TrainOutcome, TrainingSample,
};
