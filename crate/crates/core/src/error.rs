use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("feature vector is not unit-normalized (norm {norm})")]
    Normalization { norm: f64 },
    #[error("distribution support error: {0}")]
    Support(String),
    #[error("sequencing error: candidate frame {candidate} but next frame is {expected}")]
    Sequencing { candidate: usize, expected: usize },
    #[error("region {region} out of bounds for grid with {len} regions")]
    Bounds { region: usize, len: usize },
    #[error("cost model error: {0}")]
    CostModel(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("iteration did not converge after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("search space too large: {count} feasible sequences (limit {limit})")]
    SpaceTooLarge { count: u128, limit: u128 },
    #[error("format error in {field} at byte offset {offset}: {message}")]
    Format {
        field: String,
        offset: u64,
        message: String,
    },
    #[error("truncated file: {field} needs {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        field: String,
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Precondition(_) => "precondition",
            Error::Parameter(_) => "parameter",
            Error::Vocabulary(_) => "vocabulary",
            Error::Normalization { .. } => "normalization",
            Error::Support(_) => "support",
            Error::Sequencing { .. } => "sequencing",
            Error::Bounds { .. } => "bounds",
            Error::CostModel(_) => "cost-model",
            Error::Divergence { .. } => "divergence",
            Error::Convergence { .. } => "convergence",
            Error::EmptyInput(_) => "empty-input",
            Error::SpaceTooLarge { .. } => "space-too-large",
            Error::Format { .. } => "format",
            Error::Truncated { .. } => "truncated",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
