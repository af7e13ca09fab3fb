use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line front-end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    SignalProcessing,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: missing required field `{0}`")]
    MissingField(&'static str),

    #[error("configuration error: field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("configuration error: unknown blockade mode `{0}` (expected none, broadening, saturable or combined)")]
    UnknownBlockadeMode(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {needed} points required, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("carrier too close to DC ({bins:.2} bins < {min} bins); increase the beam angle")]
    CarrierSeparation { bins: f64, min: f64 },

    #[error("carrier peak detection failed: {0}")]
    PeakDetection(String),

    #[error("absorption peak for n = {0} is not resolvable")]
    UnresolvedPeak(u32),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image decoding failed: {0}")]
    Image(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingField(_)
            | Error::InvalidField { .. }
            | Error::UnknownBlockadeMode(_)
            | Error::Json(_) => ErrorKind::Config,
            Error::Domain(_) | Error::InsufficientData { .. } | Error::Numeric(_) => {
                ErrorKind::Numeric
            }
            Error::GridMismatch(_)
            | Error::CarrierSeparation { .. }
            | Error::PeakDetection(_)
            | Error::UnresolvedPeak(_) => ErrorKind::SignalProcessing,
            Error::Parse(_) | Error::Io { .. } | Error::Image(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
