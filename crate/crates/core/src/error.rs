use thiserror::Error;

/// Errors raised by oracles, solvers and certificates.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type the
/// computation ran in, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gradient inversion did not converge after {iterations} iterations (best residual {best_residual:e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("index {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate report: {0}")]
    Degenerate(String),

    #[error("Hessian of f is not positive definite: {0}")]
    IndefiniteHessian(String),

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("iterate left the locality ball: distance {distance:e} exceeds {limit:e}")]
    LocalityViolated { distance: f64, limit: f64 },

    #[error("constants are not certified for this instance: {0}")]
    Uncertified(String),
}

pub type Result<T> = std::result::Result<T, DcError>;
