//! On-disk corpus storage: tensors, alignments, and the manifest.

pub mod alignment;
pub mod manifest;
pub mod tensor;

pub use alignment::{read_alignments, write_alignments, WordAlignment};
pub use manifest::{validate_manifest, Manifest, Problem, ProblemKind, UtteranceEntry, ValidationReport};
pub use tensor::{read_tensor, write_tensor, Tensor};
