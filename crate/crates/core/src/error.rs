//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers that map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or parameters.
    Config,
    /// Invalid or out-of-range data.
    Data,
    /// Filesystem / serialization failures.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("observation {value} at index {index} is outside [0, 1]")]
    ObservationOutOfRange { value: f64, index: usize },

    #[error("stake {lambda} at grid index {index} lies outside the betting interval for mu={mu}")]
    StakeOutOfInterval { lambda: f64, mu: f64, index: usize },

    #[error("nonpositive wealth factor {factor} (lambda={lambda}, x={x}, mu={mu})")]
    NonpositiveFactor {
        factor: f64,
        lambda: f64,
        x: f64,
        mu: f64,
    },

    #[error("predictive distribution has no components")]
    EmptyPredictive,

    #[error("candidate mean {mu0} is outside the open empirical hull ({lo}, {hi})")]
    HullViolation { mu0: f64, lo: f64, hi: f64 },

    #[error("no prior preset for law {law} under regime {regime}")]
    UnknownPreset { law: String, regime: String },

    #[error("residual {value} at row {row} is outside the declared bounds [{lo}, {hi}]")]
    ResidualOutOfBounds {
        value: f64,
        row: usize,
        lo: f64,
        hi: f64,
    },

    #[error("{context}: malformed value at line {line}")]
    Parse { context: String, line: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter { .. } | Error::UnknownPreset { .. } => ErrorClass::Config,
            Error::ObservationOutOfRange { .. }
            | Error::StakeOutOfInterval { .. }
            | Error::NonpositiveFactor { .. }
            | Error::EmptyPredictive
            | Error::HullViolation { .. }
            | Error::ResidualOutOfBounds { .. }
            | Error::Parse { .. } => ErrorClass::Data,
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
