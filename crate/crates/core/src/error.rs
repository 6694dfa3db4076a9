use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("variable `{0}` appears with two different state lists")]
    StateMismatch(String),

    #[error("variable `{0}` is not in scope")]
    NotInScope(String),

    #[error("duplicate variable `{0}` in scope")]
    DuplicateVariable(String),

    #[error("table has {got} entries, scope requires {expected}")]
    TableSize { expected: usize, got: usize },

    #[error("table entries must be finite and non-negative (found {0})")]
    InvalidEntry(f64),

    #[error("CPT for `{child}` has a row summing to {sum}")]
    RowNormalization { child: String, sum: f64 },

    #[error("malformed evidence on `{node}`: {reason}")]
    MalformedEvidence { node: String, reason: String },

    #[error("evidence has probability zero")]
    ImpossibleEvidence,

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown state `{state}` for node `{node}`")]
    UnknownState { node: String, state: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unknown node kind `{kind}` for node `{node}`")]
    UnknownKind { node: String, kind: String },

    #[error("node `{node}` references missing parent `{parent}`")]
    DanglingParent { node: String, parent: String },

    #[error("expression for `{node}`: {reason}")]
    Expression { node: String, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unresolved class `{0}`")]
    UnresolvedClass(String),

    #[error("instance `{instance}` binds input `{input}` to `{source_node}`, which does not exist")]
    BadBinding { instance: String, input: String, source_node: String },

    #[error("instance `{instance}` input `{input}` is unbound and has no default prior")]
    UnboundInput { instance: String, input: String },

    #[error("identity link `{source_node}` -> `{target}` joins different state lists")]
    LinkStateMismatch { source_node: String, target: String },

    #[error("instance bindings form a cycle through `{0}`")]
    InstanceCycle(String),

    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),

    #[error("stage {stage} has no node `{node}`")]
    UnknownStageNode { stage: usize, node: String },

    #[error("evidence on decision node `{0}`; fix the decision instead")]
    EvidenceOnDecision(String),

    #[error("unknown alternative `{alternative}` for decision `{decision}`")]
    UnknownAlternative { decision: String, alternative: String },

    #[error("policy space of {0} exceeds the enumeration guard")]
    GuardExceeded(u128),

    #[error("{0}")]
    Invalid(String),
}
