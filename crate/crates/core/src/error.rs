use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("split constraint violated for subject {subject}: {message}")]
    Constraint { subject: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },

    #[error("unknown subject {0}")]
    UnknownSubject(u64),

    #[error("subject {0} has no fitted unit in this scope")]
    Scope(u64),

    #[error("kernel does not support this operation: {0}")]
    Capability(String),

    #[error("modularity undefined: total edge weight is zero")]
    ZeroWeight,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for invalid input or configuration, 2 for
    /// runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Constraint { .. }
            | Error::Config(_)
            | Error::UnknownSubject(_)
            | Error::Scope(_)
            | Error::Capability(_) => 1,
            Error::Numerical(_)
            | Error::Diverged { .. }
            | Error::ZeroWeight
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
        }
    }
}
