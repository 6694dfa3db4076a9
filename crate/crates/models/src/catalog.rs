//! Bundled model identifiers and how requests resolve to networks.

use mdss_core::{Coupling, FlatNetwork, NetworkDoc, NodeKind};
use serde::{Deserialize, Serialize};

use crate::aa::{fitted_aa, ground_truth_aa};
use crate::error::{ModelError, Result};
use crate::global::{build_global_with, GlobalConfig, StopOverride, CALIBRATED_COUPLING, CALIBRATED_STAGES};
use crate::payoff::PayoffMatrix;
use crate::pd::{build_pd_stage, build_repeated_pd_with, StopRule};
use crate::strategy::StrategyParams;

pub const AA: &str = "aa";
pub const AA_TRUTH: &str = "aa-truth";
pub const PD: &str = "pd";
pub const REPEATED: &str = "repeated";
pub const GLOBAL: &str = "global";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Chance nodes only.
    Network,
    /// Has decisions and utilities.
    Decision,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelInfo {
    pub id: String,
    pub kind: ModelKind,
    pub description: String,
    /// Accepts stage count, coupling and strategy options.
    pub configurable: bool,
}

pub fn bundled_models() -> Vec<ModelInfo> {
    let info = |id: &str, kind, description: &str, configurable| ModelInfo {
        id: id.into(),
        kind,
        description: description.into(),
        configurable,
    };
    vec![
        info(AA, ModelKind::Network, "AA intervention network fitted by EM to synthetic cases", false),
        info(AA_TRUTH, ModelKind::Network, "ground-truth AA network of the synthetic generator", false),
        info(PD, ModelKind::Decision, "one-shot prisoner's dilemma", false),
        info(REPEATED, ModelKind::Decision, "repeated prisoner's dilemma with delta-driven termination", true),
        info(GLOBAL, ModelKind::Decision, "repeated duopoly game stopped by AA intervention", true),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffPreset {
    Perfect,
    Imperfect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayoffChoice {
    Preset(PayoffPreset),
    Custom(PayoffMatrix),
}

impl PayoffChoice {
    pub fn matrix(&self) -> PayoffMatrix {
        match self {
            PayoffChoice::Preset(PayoffPreset::Perfect) => PayoffMatrix::perfect_substitutes(),
            PayoffChoice::Preset(PayoffPreset::Imperfect) => PayoffMatrix::imperfect_substitutes(),
            PayoffChoice::Custom(m) => *m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyPreset {
    Tft,
    /// Uniform likelihood on alpha_C > 0.5 and alpha_D < 0.5.
    Likelihood,
    /// Uniform priors on both parameters.
    Generalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyChoice {
    Preset(StrategyPreset),
    Custom(StrategyParams),
}

impl StrategyChoice {
    pub fn params(&self) -> StrategyParams {
        match self {
            StrategyChoice::Preset(StrategyPreset::Tft) => StrategyParams::tft(),
            StrategyChoice::Preset(StrategyPreset::Likelihood) => StrategyParams::likelihood_preset(),
            StrategyChoice::Preset(StrategyPreset::Generalized) => StrategyParams {
                mode: crate::strategy::StrategyMode::Generalized,
                stage1_cooperates: false,
                ..StrategyParams::default()
            },
            StrategyChoice::Custom(s) => s.clone(),
        }
    }
}

/// What to load: a bundled id plus options for the configurable models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelRequest {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_rule: Option<StopRule>,
}

impl ModelRequest {
    pub fn bundled(id: &str) -> Self {
        ModelRequest {
            model: id.into(),
            stages: None,
            coupling: None,
            strategy: None,
            payoff: None,
            stop_rule: None,
        }
    }

    pub fn global_config(&self) -> GlobalConfig {
        GlobalConfig {
            payoff: self.payoff.as_ref().map_or(PayoffMatrix::perfect_substitutes(), PayoffChoice::matrix),
            strategy: self.strategy.as_ref().map_or_else(StrategyParams::tft, StrategyChoice::params),
            n_stages: self.stages.unwrap_or(CALIBRATED_STAGES),
            coupling: self.coupling.unwrap_or(CALIBRATED_COUPLING),
            stop_rule: self.stop_rule.unwrap_or_default(),
            stop_override: None,
        }
    }
}

/// A resolved model, ready for sessions.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub id: String,
    pub kind: ModelKind,
    pub request: Option<ModelRequest>,
    pub flat: FlatNetwork,
    /// Present for the global model; used to rebuild under an override.
    pub global: Option<GlobalConfig>,
}

fn kind_of(doc: &NetworkDoc) -> ModelKind {
    if doc.nodes.iter().any(|n| n.kind != NodeKind::Chance) {
        ModelKind::Decision
    } else {
        ModelKind::Network
    }
}

impl LoadedModel {
    /// Wraps a user-supplied network document.
    pub fn from_doc(doc: NetworkDoc) -> Result<Self> {
        let report = doc.validate();
        if !report.ok {
            let msg = report.findings.iter().map(|f| format!("{}: {}", f.code, f.message)).collect::<Vec<_>>().join("; ");
            return Err(ModelError::Core(mdss_core::CoreError::InvalidNetwork(msg)));
        }
        Ok(LoadedModel {
            id: doc.name.clone(),
            kind: kind_of(&doc),
            request: None,
            flat: FlatNetwork::from_network(doc),
            global: None,
        })
    }

    pub fn load(req: &ModelRequest) -> Result<Self> {
        let names = || bundled_models().iter().map(|m| m.id.clone()).collect::<Vec<_>>().join(", ");
        let fixed = |doc: &NetworkDoc| -> Result<LoadedModel> {
            let mut m = LoadedModel::from_doc(doc.clone())?;
            m.id = req.model.clone();
            m.request = Some(req.clone());
            Ok(m)
        };
        match req.model.as_str() {
            AA => fixed(fitted_aa()),
            AA_TRUTH => fixed(ground_truth_aa()),
            PD => {
                let p = req.payoff.as_ref().map_or(PayoffMatrix::perfect_substitutes(), PayoffChoice::matrix);
                fixed(&build_pd_stage(&p))
            }
            REPEATED => {
                let cfg = req.global_config();
                let flat = build_repeated_pd_with(&cfg.payoff, &cfg.strategy, cfg.n_stages, cfg.stop_rule)?;
                Ok(LoadedModel {
                    id: req.model.clone(),
                    kind: ModelKind::Decision,
                    request: Some(req.clone()),
                    flat,
                    global: None,
                })
            }
            GLOBAL => {
                let cfg = req.global_config();
                let flat = build_global_with(Some(fitted_aa()), &cfg)?;
                Ok(LoadedModel {
                    id: req.model.clone(),
                    kind: ModelKind::Decision,
                    request: Some(req.clone()),
                    flat,
                    global: Some(cfg),
                })
            }
            other => Err(ModelError::UnknownModel(other.to_string(), names())),
        }
    }

    /// The same model with the AA stop signal replaced (or restored when
    /// `stop` is `None`).
    pub fn with_stop_override(&self, stop: Option<StopOverride>) -> Result<FlatNetwork> {
        let cfg = self.global.as_ref().ok_or_else(|| ModelError::NoStopSignal(self.id.clone()))?;
        let mut cfg = cfg.clone();
        cfg.stop_override = stop;
        build_global_with(Some(fitted_aa()), &cfg)
    }
}
