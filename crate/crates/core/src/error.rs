use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid interval: start {start} s, end {end} s")]
    Interval { start: f64, end: f64 },
    #[error("empty span: cannot pool zero frames")]
    EmptySpan,
    #[error("layer {layer} out of range (tensor has {n_layers} layers)")]
    Layer { layer: usize, n_layers: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unknown word: {0:?}")]
    UnknownWord(String),
    #[error("degenerate (zero) vector: {0}")]
    DegenerateVector(String),
    #[error("empty vocabulary after filtering")]
    EmptyVocabulary,
    #[error("jaccard index undefined for two empty sets")]
    UndefinedJaccard,
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("sequence error: {0}")]
    Sequence(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human-readable location (utterance, word, config).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
