//! Bundled antitrust and duopoly models, scenarios and reports.

pub mod aa;
pub mod calibration;
pub mod catalog;
pub mod error;
pub mod fixtures;
pub mod global;
pub mod payoff;
pub mod pd;
pub mod scenario;
pub mod session;
pub mod strategy;
pub mod sweep;

pub use error::{ModelError, Result};
pub use global::{build_global, build_global_with, GlobalConfig, StopOverride};
pub use payoff::PayoffMatrix;
pub use pd::{build_pd_stage, build_repeated_pd, StopRule};
pub use strategy::{AlphaBelief, StrategyMode, StrategyParams};
pub use catalog::{bundled_models, LoadedModel, ModelInfo, ModelKind, ModelRequest};
pub use session::{DecisionReport, EvidenceInput, EvidenceType, MarginalsReport, ModelSession, NodeMarginal, Stages};
pub use scenario::{run_scenario, Report, ScenarioDoc};
pub use sweep::{table6_sweep, SweepConfig, SweepReport};
