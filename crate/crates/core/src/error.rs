use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("invalid {field}{}: {reason}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    InvalidConfig {
        field: String,
        line: Option<usize>,
        reason: String,
    },

    #[error("quadrature did not converge: achieved {achieved:.3e} relative error, requested {requested:.1e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("projected field {0:.4e} T is outside the linear Zeeman range")]
    FieldOutOfRange(f64),

    #[error("no resonance found in spectrum")]
    NoResonance,

    #[error("reference spectrum could not be fitted: {0}")]
    ReferenceFit(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("dataset '{0}' carries no signal above the noise floor")]
    NoSignal(String),

    #[error("inclusion set did not stabilise within {0} rounds")]
    InclusionUnstable(usize),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("malformed {}{}: {message}", .path.display(), .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Malformed {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. } | Error::InvalidConfig { .. } | Error::Malformed { .. } => ErrorKind::Validation,
            Error::NotFound(_) | Error::Io { .. } => ErrorKind::Io,
            Error::Quadrature { .. }
            | Error::FieldOutOfRange(_)
            | Error::NoResonance
            | Error::ReferenceFit(_)
            | Error::Degenerate(_)
            | Error::NoSignal(_)
            | Error::InclusionUnstable(_) => ErrorKind::Numerical,
        }
    }
}
