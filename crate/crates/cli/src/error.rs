use std::path::PathBuf;

use kbfollow::KbError;
use kbfollow_grad::GradError;
use kbfollow_tasks::TaskError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed configuration.
    #[error("config: {0}")]
    Config(String),
    /// Well-formed input that fails validation.
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark guard: {0}")]
    Guard(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

impl CliError {
    /// 2 for validation failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Guard(_) => 2,
            CliError::Task(TaskError::Config(_) | TaskError::UnknownToken(_) | TaskError::UnknownQueryRelation(_)) => 2,
            CliError::Task(TaskError::MissingGroupTag(_)) => 2,
            CliError::Kb(KbError::UnknownName(_) | KbError::TypeMismatch(_) | KbError::IncompatibleRelations(_)) => 2,
            CliError::Kb(KbError::InvalidShardCount { .. } | KbError::NegativeWeight { .. }) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
