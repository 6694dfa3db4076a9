use mdss_core::CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, LearningError>;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("case data: {0}")]
    Csv(#[from] csv::Error),

    #[error("case data row {row}, column `{column}`: unknown state `{label}`")]
    UnknownLabel { row: usize, column: String, label: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("insufficient data for the independence test of `{x}` and `{y}`")]
    InsufficientData { x: String, y: String },

    #[error("conditioning set of size {size} exceeds the limit of {limit}")]
    ConditioningTooLarge { size: usize, limit: usize },

    #[error("contradictory constraints: {0}")]
    ConstraintContradiction(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("constraint file: {0}")]
    ConstraintFile(#[from] serde_json::Error),

    #[error("{0}")]
    Invalid(String),
}
