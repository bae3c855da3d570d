//! Error type shared by all modules.

/// Errors surfaced by the numerical kernel.
///
/// `InvalidArgument` marks contract violations by the caller,
/// `NumericFailure` marks iterative procedures that exhausted their budget,
/// and `DataAssumption` marks inputs that violate a standing integrability
/// hypothesis (for example a terminal condition outside the effective
/// domain of the convex function).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure in {context}: residual {residual:.6e} after {iterations} iterations")]
    NumericFailure {
        context: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("data assumption violated: {0}")]
    DataAssumption(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
