use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation point outside a path's closed domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    /// Calibration could not reach the requested pass rate; carries the best rate found.
    #[error("calibration error: {message} (best achievable pass rate {best_pass_rate:.4})")]
    Calibration { message: String, best_pass_rate: f64 },

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
