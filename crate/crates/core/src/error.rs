use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the vacuum-polarization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pole of {function} at {at}")]
    Pole { function: &'static str, at: String },

    #[error("{function}: argument outside its domain ({detail})")]
    Domain { function: &'static str, detail: String },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no oscillation spike above the noise floor (peak/background = {ratio:.3})")]
    NoSpike { ratio: f64 },

    #[error("decomposition failed: remainder norm {remainder:.4} still above {tolerance} after {frequencies} frequencies")]
    DecompositionFailed { remainder: f64, tolerance: f64, frequencies: usize },

    #[error("gradient descent diverged: {0}")]
    Divergence(String),

    #[error("missing upstream artifact {path}; run `vacpol {stage}` first")]
    MissingUpstream { stage: &'static str, path: PathBuf },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { function, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit status used by the command-line driver.
    ///
    /// 2 for anything the user can fix by changing the inputs, 3 for numerical
    /// failures, 1 for IO and serialization problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_)
            | Error::Domain { .. }
            | Error::Config(_)
            | Error::MissingUpstream { .. } => 2,
            Error::Pole { .. }
            | Error::NonConvergence { .. }
            | Error::GridTooCoarse(_)
            | Error::NoSpike { .. }
            | Error::DecompositionFailed { .. }
            | Error::Divergence(_) => 3,
            Error::Io { .. } | Error::Serde(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
