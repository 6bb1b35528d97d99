use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("state became non-finite at tau={tau}")]
    NonFiniteState { tau: f64 },

    #[error("invariant drift {drift:.3e} exceeds tolerance at tau={tau}")]
    InvariantDriftExceeded { tau: f64, drift: f64 },

    #[error("convergence radius {radius:.3e} exceeds the validity bound at tau={tau}")]
    ValidityRadiusExceeded { tau: f64, radius: f64 },

    #[error("step-halving error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    AccuracyExceeded { estimate: f64, tolerance: f64 },

    #[error("window ({from}, {to}) is outside the trajectory span [0, {span}]")]
    WindowOutOfRange { from: f64, to: f64, span: f64 },

    #[error("sample spacing {spacing} does not divide the drive period {period}")]
    IncommensurateStep { spacing: f64, period: f64 },

    #[error("operation not supported for {0} drive")]
    UnsupportedDrive(&'static str),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 2 configuration, 3 accuracy, 4 validity radius, 5 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. }
            | Error::InvalidParams { .. }
            | Error::WindowOutOfRange { .. }
            | Error::IncommensurateStep { .. }
            | Error::UnsupportedDrive(_) => 2,
            Error::InvariantDriftExceeded { .. } | Error::AccuracyExceeded { .. } | Error::NonFiniteState { .. } => 3,
            Error::ValidityRadiusExceeded { .. } => 4,
            Error::Io { .. } => 5,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
