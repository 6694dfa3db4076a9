use mdss_core::CoreError;
use mdss_learning::LearningError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid strategy parameter: {0}")]
    InvalidAlpha(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("unknown model `{0}`; bundled models are: {1}")]
    UnknownModel(String, String),
    #[error("model `{0}` has no stop signal to override")]
    NoStopSignal(String),
    #[error("evidence on `{0}` conflicts with a stop-probability override; retract it first")]
    OverrideConflict(String),
    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),
    #[error("step {step} ({op}): {source}")]
    Step {
        step: usize,
        op: String,
        #[source]
        source: Box<ModelError>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl ModelError {
    /// Innermost error, skipping step annotations.
    pub fn root(&self) -> &ModelError {
        match self {
            ModelError::Step { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn step(&self) -> Option<usize> {
        match self {
            ModelError::Step { step, .. } => Some(*step),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
