use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("duplicate triple ({subj}, {rel}, {obj}) with conflicting weights {first} and {second}")]
    DuplicateTriple {
        subj: String,
        rel: String,
        obj: String,
        first: f64,
        second: f64,
    },
    #[error("negative or non-finite weight {weight} for `{name}`")]
    NegativeWeight { name: String, weight: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("relations are not type-compatible: {0}")]
    IncompatibleRelations(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("batch size mismatch: {0} vs {1}")]
    BatchMismatch(usize, usize),
    #[error("invalid shard count {m} for {n_triples} triples")]
    InvalidShardCount { m: usize, n_triples: usize },
    #[error("invalid shard ranges: {0}")]
    InvalidPartition(String),
    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),
    #[error("strategy `{0}` does not support this operation")]
    StrategyUnavailable(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KbError {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        KbError::DimensionMismatch(msg.into())
    }
}
