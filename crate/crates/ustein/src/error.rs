use thiserror::Error;

/// Library-wide error type. The CLI maps variants onto exit codes:
/// `Config` → 1, `Numerical` and `CostGuard` → 2.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration, unknown model name, bad parameters.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical precondition failed (non-PD matrix, singular covariance,
    /// zero-mass measure, non-convergence).
    #[error("numerical precondition failed: {0}")]
    Numerical(String),

    /// An operation would exceed its evaluation budget.
    #[error("cost guard: {0}")]
    CostGuard(String),

    /// An integrand or kernel produced NaN/inf.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn cost_guard(msg: impl Into<String>) -> Self {
        Error::CostGuard(msg.into())
    }

    pub fn non_finite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }
}
