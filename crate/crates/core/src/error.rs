use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column '{column}': {message}")]
    Parse { path: PathBuf, row: usize, column: String, message: String },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),

    #[error("unknown sample id '{0}'")]
    UnknownId(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("overlapping sample set is empty; at least one shared sample id is required")]
    EmptyOverlap,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}:{line}:{column}: {message}", path.display())]
    ConfigAt { path: PathBuf, line: usize, column: usize, message: String },

    #[error("training diverged (seed {seed}, epoch {epoch}): loss is not finite")]
    Divergence { seed: u64, epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage '{stage}' failed (seed {seed}): {source}")]
    Stage {
        stage: &'static str,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn at_stage(self, stage: &'static str, seed: u64) -> Self {
        Error::Stage { stage, seed, source: Box::new(self) }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Csv { .. } => "csv",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownId(_) => "unknown_id",
            Error::Shape(_) => "shape",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Degenerate(_) => "degenerate",
            Error::EmptyOverlap => "empty_overlap",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Schema(_) => "schema",
            Error::Config(_) | Error::ConfigAt { .. } => "config",
            Error::Divergence { .. } => "divergence",
            Error::Checkpoint(_) => "checkpoint",
            Error::Protocol(_) => "protocol",
            Error::Json(_) => "json",
            Error::Stage { source, .. } => source.kind(),
        }
    }
}
