use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("threshold is never reached: signal intensity and fluctuation strength are both zero")]
    NoDetection,

    #[error("underdetermined fit: {points} usable points for {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("quadrature did not reach tolerance: estimate {value:e}, error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for errors caused by bad inputs rather than by a run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NoDetection
                | Error::Underdetermined { .. }
                | Error::Row { .. }
        )
    }
}

pub(crate) fn require(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(name, reason()))
    }
}

pub(crate) fn require_nonneg(value: f64, name: &'static str) -> Result<()> {
    require(value.is_finite() && value >= 0.0, name, || format!("must be >= 0 (got {value})"))
}

pub(crate) fn require_positive(value: f64, name: &'static str) -> Result<()> {
    require(value.is_finite() && value > 0.0, name, || format!("must be > 0 (got {value})"))
}
