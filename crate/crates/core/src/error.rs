use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid time series: {0}")]
    TimeSeries(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("horizon mismatch: {what} has {found} samples, expected {expected}")]
    HorizonMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("tariff uses real-time pricing but no price series was supplied")]
    MissingPrices,

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("{problem} LP did not solve to optimality: {status}")]
    NotOptimal { problem: String, status: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
