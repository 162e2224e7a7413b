use thiserror::Error;

#[derive(Debug, Error)]
pub enum CokeError {
    #[error("degenerate vector: norm {norm:e} is below 1e-12")]
    DegenerateVector { norm: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate mean for cluster {cluster}: accumulated sum has norm {norm:e}")]
    DegenerateMean { cluster: usize, norm: f64 },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CokeError>;

impl CokeError {
    /// True for errors that stem from the numbers rather than from how the
    /// engine was invoked.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            CokeError::DegenerateVector { .. } | CokeError::DegenerateMean { .. } | CokeError::Infeasible(_) | CokeError::Numeric(_)
        )
    }
}
