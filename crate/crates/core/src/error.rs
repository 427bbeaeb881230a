use std::path::PathBuf;

/// Errors raised by mesh construction, assembly, time stepping and the run harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("config error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("step {step} failed: {detail} (relative residual {residual:e})")]
    StepFailure {
        step: usize,
        residual: f64,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::ConfigParse { .. } | Error::Validation(_) => 2,
            Error::Topology(_)
            | Error::Assembly(_)
            | Error::Numerical(_)
            | Error::StepFailure { .. } => 3,
            Error::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
