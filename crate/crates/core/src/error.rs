use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, the estimators and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no active flows: PRB share is undefined")]
    NoActiveFlows,

    #[error("no registered flows")]
    NoFlows,

    #[error("statistics window is empty (tn = 0)")]
    InsufficientWindow,

    #[error("frame interval must be positive, got {0}")]
    NonPositiveInterval(f64),

    #[error("unknown controller `{0}`")]
    UnknownController(String),

    #[error("trace {path}: line {line}: {msg}")]
    TraceParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("trace {0} is empty")]
    EmptyTrace(PathBuf),

    #[error("event log line {line}: {msg}")]
    EventLogParse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario parse error: {0}")]
    ScenarioParse(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (scenario or trace), as opposed to
    /// failures while running or writing results.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownController(_)
                | Error::TraceParse { .. }
                | Error::EmptyTrace(_)
                | Error::ScenarioParse(_)
                | Error::NoFlows
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
