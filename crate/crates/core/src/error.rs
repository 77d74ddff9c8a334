//! Crate-wide error type.
//!
//! - `InvalidArgument` reports precondition violations detected at call sites.
//! - `DegenerateTriangle` names the offending triangle during assembly.
//! - `Config` carries the key path of a rejected configuration entry.
//! - `Numerical` reports solver breakdowns (indefinite systems, NaN data).
//! - `Io` wraps filesystem failures together with the path involved.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate triangle {index}: signed area {area}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("config error at `{key}`: {detail}")]
    Config { key: String, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
