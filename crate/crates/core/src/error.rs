use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// A type invariant was violated; `what` names the field or invariant.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("band [{lo} Hz, {hi} Hz]: {reason}")]
    Band { lo: f64, hi: f64, reason: String },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("calibration blow-up at {frequency} Hz: |tf| = {magnitude:e} is below the floor {floor:e}")]
    Calibration {
        frequency: f64,
        magnitude: f64,
        floor: f64,
    },

    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn band(band: (f64, f64), reason: impl Into<String>) -> Self {
        Error::Band {
            lo: band.0,
            hi: band.1,
            reason: reason.into(),
        }
    }
}
