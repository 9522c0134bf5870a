use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Rows and columns are 1-based, counting the header line when present.
    #[error("parse error at row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: usize, value: String },

    #[error("label column {0} not found")]
    MissingLabelColumn(String),

    #[error("dataset has a single class ({0}); at least two are required")]
    SingleClass(String),

    #[error("unknown class label {0:?}")]
    UnknownClass(String),

    #[error("class {class} has no evaluation instances")]
    EmptyClass { class: usize },

    #[error("training diverged (non-finite loss); last finite epoch: {last_finite_epoch:?}")]
    TrainingFailure { last_finite_epoch: Option<usize> },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Parse { .. } => "parse",
            Error::MissingLabelColumn(_) => "missing-label-column",
            Error::SingleClass(_) => "single-class",
            Error::UnknownClass(_) => "unknown-class",
            Error::EmptyClass { .. } => "empty-class",
            Error::TrainingFailure { .. } => "training-failure",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
        }
    }
}
