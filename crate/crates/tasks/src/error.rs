use std::path::PathBuf;

use kbfollow::KbError;
use kbfollow_grad::GradError;
use thiserror::Error;

pub type Result<T, E = TaskError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("unknown query relation `{0}`")]
    UnknownQueryRelation(String),
    #[error("no relations carry the `{0}` group tag")]
    MissingGroupTag(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Dataset { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Grad(#[from] GradError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TaskError + '_ {
    move |source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    }
}
