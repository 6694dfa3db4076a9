use mdss_core::Coupling;
use mdss_models::catalog::{PayoffChoice, PayoffPreset};
use mdss_models::sweep::{EvidencePath, SweepConfig};
use serde::{Deserialize, Serialize};

/// Optional overrides of the default sweep, shared by CLI flags and HTTP bodies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_none: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<EvidencePath>,
}

impl SweepRequest {
    pub fn config(&self) -> SweepConfig {
        let d = SweepConfig::default();
        SweepConfig {
            p_none: self.p_none.unwrap_or(d.p_none),
            p_e1: self.p_e1.unwrap_or(d.p_e1),
            p_e2: self.p_e2.unwrap_or(d.p_e2),
            n_stages: self.stages.unwrap_or(d.n_stages),
            coupling: self.coupling.unwrap_or(d.coupling),
            payoff: self
                .payoff
                .as_ref()
                .map_or(PayoffChoice::Preset(PayoffPreset::Perfect), Clone::clone)
                .matrix(),
            path: self.path.unwrap_or(d.path),
        }
    }
}
