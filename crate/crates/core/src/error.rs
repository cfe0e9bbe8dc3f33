use thiserror::Error;

pub type Result<T> = std::result::Result<T, NspError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NspError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A nonlinearity was evaluated outside of its domain of definition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("vacuum: density {min_density:.6e} at r = {r:.6} (t = {t:.6})")]
    Vacuum { t: f64, r: f64, min_density: f64 },

    #[error("monotone iteration lost its ordering: {0}")]
    Monotonicity(String),

    #[error("iteration did not converge: {0}")]
    Iteration(String),

    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(NspError::Parameter(msg.into()))
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NspError::NonFinite(what.to_string()))
    }
}
