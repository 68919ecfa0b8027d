use thiserror::Error;

/// Errors raised by the contact library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("barrier breached: penetration {x} is outside the barrier domain (x < 0)")]
    BarrierBreached { x: f64 },

    #[error("operation `{op}` is not supported for the {law} law")]
    UnsupportedLaw { op: &'static str, law: &'static str },

    #[error("degenerate contact: {0}")]
    DegenerateContact(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("non-PSD contact Hessian at contact {contact}: min eigenvalue {min_eigenvalue:e}")]
    NonConvexContact { contact: usize, min_eigenvalue: f64 },

    #[error("solver did not converge at step {step} (t = {time}): {iterations} iterations, gradient residual {residual:e}")]
    NonConvergence { step: usize, time: f64, iterations: usize, residual: f64 },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
