//! The integrated game: duopoly stages whose stop signal is the AA decision.

use mdss_core::oobn::{self, Interface, AA_OUT};
use mdss_core::{ClassDoc, Coupling, FlatNetwork, NetworkDoc, NodeSpec};
use serde::{Deserialize, Serialize};

use crate::aa::aa_class;
use crate::error::{ModelError, Result};
use crate::payoff::PayoffMatrix;
use crate::pd::{apply_strategy, stage_class, StopRule, StopSource, STOP_STATES};
use crate::strategy::StrategyParams;

/// Prior intervention rate, used for stages without their own override.
pub const BASELINE_STOP: f64 = 0.0189;

/// Stage count selected by calibration and used by the bundled fixtures.
pub const CALIBRATED_STAGES: usize = 3;
/// Coupling selected by calibration and used by the bundled fixtures.
pub const CALIBRATED_COUPLING: Coupling = Coupling::PerStageAa;

/// Replaces the AA network by Bernoulli stop signals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StopOverride {
    /// Stop probability of the first AA instance.
    pub p: f64,
    /// Stop probability of the remaining per-stage instances
    /// (defaults to [`BASELINE_STOP`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub later_stages: Option<f64>,
}

impl StopOverride {
    pub fn new(p: f64) -> Self {
        StopOverride { p, later_stages: None }
    }

    pub fn validate(&self) -> Result<()> {
        for v in std::iter::once(self.p).chain(self.later_stages) {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(ModelError::InvalidProbability(v));
            }
        }
        Ok(())
    }

    pub fn later(&self) -> f64 {
        self.later_stages.unwrap_or(BASELINE_STOP)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalConfig {
    pub payoff: PayoffMatrix,
    pub strategy: StrategyParams,
    pub n_stages: usize,
    pub coupling: Coupling,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_override: Option<StopOverride>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            payoff: PayoffMatrix::perfect_substitutes(),
            strategy: StrategyParams::tft(),
            n_stages: CALIBRATED_STAGES,
            coupling: CALIBRATED_COUPLING,
            stop_rule: StopRule::default(),
            stop_override: None,
        }
    }
}

impl GlobalConfig {
    pub fn with_override(mut self, p: f64) -> Self {
        self.stop_override = Some(StopOverride::new(p));
        self
    }
}

/// A class whose only node is a Bernoulli stop signal.
pub fn stop_class(name: &str, p: f64) -> ClassDoc {
    ClassDoc {
        name: name.into(),
        interface: Interface {
            inputs: vec![],
            outputs: vec![AA_OUT.into()],
        },
        nodes: vec![NodeSpec::chance(AA_OUT, &STOP_STATES, &[], vec![1.0 - p, p])],
        decision_order: vec![],
        instances: vec![],
    }
}

/// Unrolled game with every stage's stop input bound to an AA instance.
pub fn build_global(aa: &NetworkDoc, p: &PayoffMatrix, s: &StrategyParams, n_stages: usize, coupling: Coupling) -> Result<FlatNetwork> {
    let cfg = GlobalConfig {
        payoff: *p,
        strategy: s.clone(),
        n_stages,
        coupling,
        stop_rule: StopRule::default(),
        stop_override: None,
    };
    build_global_with(Some(aa), &cfg)
}

/// As [`build_global`]; with an override the AA network is not needed.
pub fn build_global_with(aa: Option<&NetworkDoc>, cfg: &GlobalConfig) -> Result<FlatNetwork> {
    let stage = stage_class(&cfg.payoff, cfg.strategy.mode, StopSource::Input, cfg.stop_rule);
    let classes: Vec<ClassDoc> = match (&cfg.stop_override, aa) {
        (Some(o), _) => {
            o.validate()?;
            match cfg.coupling {
                Coupling::SharedAa => vec![stop_class("StopSignal", o.p)],
                Coupling::PerStageAa => {
                    let mut v = vec![stop_class("StopSignal", o.p)];
                    let later = stop_class("StopSignalLater", o.later());
                    v.extend(std::iter::repeat_n(later, cfg.n_stages));
                    v
                }
            }
        }
        (None, Some(aa)) => {
            if aa.variable(AA_OUT).map(|v| v.states().len()).ok() != Some(2) {
                return Err(ModelError::Core(mdss_core::CoreError::InterfaceMismatch(format!(
                    "AA network must hold a binary `{AA_OUT}` node"
                ))));
            }
            vec![aa_class(aa)]
        }
        (None, None) => return Err(ModelError::Invalid("the global model needs an AA network or a stop override".into())),
    };
    let refs: Vec<&ClassDoc> = classes.iter().collect();
    let flat = oobn::unroll_repeated_with(&stage, &refs, cfg.n_stages, cfg.coupling)?;
    apply_strategy(&flat, &cfg.strategy)
}
