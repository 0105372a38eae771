use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    /// `TᵗT` (or another Gram matrix) is too ill-conditioned to invert.
    #[error("singular matrix: condition estimate {condition:.3e} exceeds {limit:.3e}")]
    Singular { condition: f64, limit: f64 },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// Constraint gradients are linearly dependent at the point.
    #[error("constraint gradients are not independent: {0}")]
    Regularity(String),

    #[error("point is off the manifold: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    OffManifold { residual: f64, tolerance: f64 },

    #[error("coordinate {index} is too small for a chart (|x| = {magnitude:.3e}); try index {suggestion}")]
    Chart { index: usize, magnitude: f64, suggestion: usize },

    #[error("matrix is not orthogonal: max |UᵗU - I| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotOrthogonal { deviation: f64, tolerance: f64 },

    #[error("contract violated: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
