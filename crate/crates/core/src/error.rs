use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The scenario (or another input) is not a well-formed model description.
    #[error("malformed input: {0}")]
    Structural(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance matrix is singular at the working precision.
    #[error("ill-conditioned covariance: smallest eigenvalue {min_eigenvalue:e} below {threshold:e}")]
    IllConditioned {
        min_eigenvalue: f64,
        threshold: f64,
    },

    /// Node doubling failed to settle the quadrature within tolerance.
    #[error("quadrature failed to converge: last change {change:e} exceeds {tolerance:e}")]
    Accuracy { change: f64, tolerance: f64 },

    /// The request is valid but outside what the engines support.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Self::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Self::Unsupported(msg.into())
    }

    /// True for errors caused by a malformed input rather than a failed solve.
    pub fn is_structural(&self) -> bool {
        matches!(self, Self::Structural(_))
    }
}
