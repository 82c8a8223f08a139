//! Layer-wise analysis of acoustic word embeddings (AWEs) built from
//! self-supervised speech representations.
//!
//! * [`store`]: binary tensor container, alignments, corpus manifest.
//! * [`pooling`]: word spans to frames, mean-pooled AWEs, the AWE store.
//! * [`neighborhood`]: cosine KNN and Local Neighborhood Similarity (LNS).
//! * [`nn`]: dense classifier and cross-attention fusion with exact gradients.
//! * [`ser`]: emotion-recognition experiments, layer sweeps, synthetic corpora, reports.

pub mod error;
pub mod neighborhood;
pub mod nn;
pub mod pooling;
pub mod scalar;
pub mod ser;
pub mod store;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type EmbeddingSpaceF32 = neighborhood::EmbeddingSpace<f32>;
pub type EmbeddingSpaceF64 = neighborhood::EmbeddingSpace<f64>;
pub type MlpF32 = nn::Mlp<f32>;
pub type MlpF64 = nn::Mlp<f64>;
pub type CrossAttentionF32 = nn::CrossAttention<f32>;
pub type CrossAttentionF64 = nn::CrossAttention<f64>;
pub type ClassifierF32 = nn::Classifier<f32>;
pub type ClassifierF64 = nn::Classifier<f64>;
