use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomoError {
    /// Two objects that must share a layout (site count, physical dimension,
    /// bond dimensions) do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Operands are expressed in different per-site operator bases.
    #[error("operator basis mismatch: {0} vs {1}")]
    BasisMismatch(String, String),

    /// A state whose trace or norm is (numerically) zero was asked to be
    /// normalized.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The compressed operator is farther from its target than the configured
    /// abort threshold; either raise the bond dimension or abort.
    #[error("compression failed: relative error {relative_error:.3e} exceeds threshold {threshold:.3e}")]
    CompressionFailure { relative_error: f64, threshold: f64 },

    /// Dense oracle or dense generator asked for a system above its limit.
    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure at site {site}: {msg}")]
    Numerical { site: usize, msg: String },

    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("measurement record: {0}")]
    Record(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TomoError>;
