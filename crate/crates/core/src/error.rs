use thiserror::Error;

pub type Result<T, E = FernError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FernError {
    /// Violated precondition on an argument (shape, sign, ordering).
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation grid incompatible with the model (POD same-mesh requirement).
    #[error("grid error: {0}")]
    Grid(String),

    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// PDE solver failure (blow-up, lost positivity).
    #[error("solver error: {0}")]
    Solver(String),

    /// Artifact file does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FernError {
    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub fn grid(msg: impl Into<String>) -> Self {
        Self::Grid(msg.into())
    }
}
