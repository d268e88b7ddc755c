use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the models, fitters, controller and simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter container violates one of its construction invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A regression could not be carried out on the supplied data.
    #[error("fit error: {0}")]
    Fit(String),

    /// A text file could not be tokenised into numbers.
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A file parsed but its layout does not match the expected schema.
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },

    /// A well-formed table holds a value that breaks a physical invariant.
    #[error("invariant violation in {path} at row {row}, column {column}: {message}")]
    Invariant {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Fit(_) => "fit",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Invariant { .. } => "invariant",
            Error::Scenario(_) => "scenario",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
