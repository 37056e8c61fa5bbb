use thiserror::Error;

/// Errors raised by samplers, simulators, quadrature and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("quadrature did not converge: estimated error {error_estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { error_estimate: f64, tolerance: f64 },

    #[error("truncation error bound {bound:e} exceeds requested tolerance {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("experiment `{experiment}` failed: {source}")]
    Experiment { experiment: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

/// Rejects NaN/inf and values outside `[lo, hi]`.
pub(crate) fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(name, format!("must be finite, got {value}")));
    }
    if value < lo || value > hi {
        return Err(invalid(name, format!("must lie in [{lo}, {hi}], got {value}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(invalid(name, format!("must be finite and > 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(invalid(name, format!("must be finite and >= 0, got {value}")));
    }
    Ok(())
}
