//! Probabilistic core: factors, networks, object-oriented composition,
//! junction-tree inference and influence-diagram evaluation.

pub mod decision;
pub mod enumeration;
pub mod error;
pub mod expr;
pub mod factor;
pub mod inference;
pub mod network;
pub mod oobn;

pub use decision::{AlternativeEu, DecisionPolicy, DecisionProblem, DecisionResult};
pub use error::{CoreError, Result};
pub use expr::CptExpr;
pub use factor::{Cpt, Evidence, EvidenceKind, Factor, Table, Variable};
pub use inference::{BayesNet, Elimination, InferenceSession, JunctionTree};
pub use network::{NetworkDoc, NodeKind, NodeSpec, TableSpec, ValidationReport};
pub use oobn::{ClassDoc, Coupling, FlatNetwork, Registry};
