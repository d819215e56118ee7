use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions or structure of an input do not match what the operation needs.
    #[error("structural error: {0}")]
    Structure(String),

    /// Input lies outside the numerical domain of the operation
    /// (non-positive-definite matrix, negative K-factor, ...).
    #[error("numerical domain error: {0}")]
    Domain(String),

    #[error("matrix of order {order} exceeds the limit of {limit} for {what}")]
    Size {
        what: &'static str,
        order: usize,
        limit: usize,
    },

    #[error("marginal fitting did not converge after {sweeps} sweeps (residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
