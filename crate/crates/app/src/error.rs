use mdss_core::CoreError;
use mdss_learning::LearningError;
use mdss_models::ModelError;
use serde::{Deserialize, Serialize};

/// Machine-readable failure shared by the CLI and the HTTP service.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

/// Codes a command line can cause by mistyping; the CLI exits with 2.
const USAGE_CODES: [&str; 10] = [
    "usage",
    "malformed-request",
    "unknown-node",
    "unknown-state",
    "unknown-model",
    "unknown-alternative",
    "unknown-quantity",
    "invalid-probability",
    "invalid-strategy",
    "io-error",
];

fn core_code(e: &CoreError) -> &'static str {
    use CoreError::*;
    match e {
        UnknownNode(_) | UnknownStageNode { .. } => "unknown-node",
        UnknownState { .. } => "unknown-state",
        EvidenceOnDecision(_) => "evidence-on-decision",
        MalformedEvidence { .. } => "invalid-evidence",
        ImpossibleEvidence => "impossible-evidence",
        InvalidVariable { .. }
        | StateMismatch(_)
        | DuplicateVariable(_)
        | TableSize { .. }
        | InvalidEntry(_)
        | RowNormalization { .. }
        | Syntax { .. }
        | UnknownKind { .. }
        | DanglingParent { .. }
        | Expression { .. }
        | InvalidNetwork(_) => "invalid-network",
        UnresolvedClass(_)
        | BadBinding { .. }
        | UnboundInput { .. }
        | LinkStateMismatch { .. }
        | InstanceCycle(_)
        | InterfaceMismatch(_) => "invalid-composition",
        UnknownAlternative { .. } => "unknown-alternative",
        GuardExceeded(_) => "guard-exceeded",
        NotInScope(_) | Invalid(_) => "engine-error",
    }
}

fn learning_code(e: &LearningError) -> &'static str {
    use LearningError::*;
    match e {
        Core(c) => core_code(c),
        Csv(_) | UnknownLabel { .. } | Schema(_) | EmptyDataset => "invalid-data",
        InsufficientData { .. } => "insufficient-data",
        ConditioningTooLarge { .. } | ConstraintContradiction(_) | UnknownVariable(_) | ConstraintFile(_) => {
            "invalid-constraints"
        }
        Invalid(_) => "learning-error",
    }
}

pub fn model_code(e: &ModelError) -> &'static str {
    match e.root() {
        ModelError::Core(c) => core_code(c),
        ModelError::Learning(l) => learning_code(l),
        ModelError::Json(_) => "malformed-request",
        ModelError::InvalidAlpha(_) => "invalid-strategy",
        ModelError::InvalidProbability(_) => "invalid-probability",
        ModelError::UnknownModel(..) => "unknown-model",
        ModelError::NoStopSignal(_) => "no-stop-signal",
        ModelError::OverrideConflict(_) => "override-conflict",
        ModelError::UnknownQuantity(_) => "unknown-quantity",
        ModelError::Invalid(_) => "invalid-request",
        ModelError::Step { .. } => unreachable!("root strips step annotations"),
    }
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            code: code.into(),
            message: message.into(),
            step: None,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        ApiError::new("usage", message)
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        ApiError::new("malformed-request", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new("unknown-session", format!("no session `{id}`"))
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        ApiError::new("io-error", format!("{}: {e}", path.display()))
    }

    /// Adds the valid node names to unknown-node messages.
    pub fn with_nodes(mut self, nodes: &[String]) -> Self {
        if self.code == "unknown-node" {
            self.message = format!("{}; valid nodes: {}", self.message, nodes.join(", "));
        }
        self
    }

    pub fn is_usage(&self) -> bool {
        USAGE_CODES.contains(&self.code.as_str())
    }

    /// HTTP status for this code.
    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "unknown-session" | "not-found" => 404,
            "engine-error" | "internal" => 500,
            _ => 400,
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        ApiError {
            code: model_code(&e).into(),
            message: e.root().to_string(),
            step: e.step(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        ApiError::new(core_code(&e), e.to_string())
    }
}

impl From<LearningError> for ApiError {
    fn from(e: LearningError) -> Self {
        ApiError::new(learning_code(&e), e.to_string())
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
