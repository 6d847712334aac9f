use thiserror::Error;

/// Everything that can go wrong between a model description and a quadrature estimate.
#[derive(Debug, Error)]
pub enum QsqError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not unitary (max |M^H M - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("Gram matrix is ill-conditioned (smallest eigenvalue {lambda_min:.3e})")]
    IllConditioned { lambda_min: f64 },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("{qubits} qubits exceeds the configured limit of {limit}")]
    SizeGuard { qubits: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function is undefined at {0}")]
    Undefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl QsqError {
    /// True for failures caused by bad input or configuration rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            QsqError::Config(_)
                | QsqError::InvalidParameter(_)
                | QsqError::SizeGuard { .. }
                | QsqError::Io(_)
                | QsqError::Json(_)
                | QsqError::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, QsqError>;
