//! Differentiable classifier kernel: ReLU MLP, bidirectional cross-attention,
//! softmax cross-entropy, and an adaptive-moment optimizer.

pub mod adam;
pub mod attention;
pub mod mlp;
pub mod model;
pub mod ops;
pub mod params;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use attention::{concat_fuse, cross_attend, pool_sequence, AttentionHead, CrossAttention};
pub use mlp::{mlp_forward, Mlp};
pub use model::{backward, Classifier, Input, ModelConfig};
pub use ops::{cross_entropy, cross_entropy_from_logits, softmax};
pub use params::{Dense, Params};
pub use train::{train, TrainConfig};

#[cfg(test)]
mod gradient_tests;
