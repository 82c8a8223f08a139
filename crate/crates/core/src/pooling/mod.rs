//! Acoustic word embeddings: frame spans, mean pooling, and the AWE store.

pub mod builder;
pub mod span;
pub mod store;

pub use builder::{build_awes, pool_word, AweRecord, LayeredUtterance};
pub use span::{time_to_frame_span, FrameGrid, FrameSpan};
pub use store::{AweStore, IndexRow};
