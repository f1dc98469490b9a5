use std::path::PathBuf;

use kbfollow::KbError;
use thiserror::Error;

pub type Result<T, E = GradError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("strategy `{0}` has no batched backward pass")]
    StrategyUnavailable(&'static str),
    #[error("loss must be a 1x1 node, got {0}x{1}")]
    NonScalarLoss(usize, usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Kb(#[from] KbError),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> GradError {
    GradError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}
