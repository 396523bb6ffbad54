use crate::sdp::RelaxationSolution;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input text does not conform to the problem schema.
    #[error("parse error in `{field}`: {reason}")]
    Parse { field: String, reason: String },

    /// Structurally well-formed input that violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical kernel produced an out-of-contract result
    /// (non-finite intermediate, negative radicand beyond tolerance, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Requested problem size exceeds a configured dense-algebra limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The conic solver hit its iteration cap. Carries the best iterate
    /// so the caller can inspect how far the solve got.
    #[error("solver did not converge in {iterations} iterations (best residual {best_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        best_residual: f64,
        best: Box<RelaxationSolution>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
