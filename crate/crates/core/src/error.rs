use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error at row {row}: {msg}")]
    Ingest { row: u64, msg: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The metric is not differentiable at the evaluation point; callers are
    /// expected to perturb the input and retry.
    #[error("gradient undefined: {0}")]
    GradientUndefined(String),

    #[error("optimization aborted at epoch {epoch}: {msg}")]
    Aborted {
        epoch: usize,
        msg: String,
        trace: Vec<f64>,
    },

    #[error("calibration failed for every seed: {}", .0.join("; "))]
    CalibrationFailed(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
