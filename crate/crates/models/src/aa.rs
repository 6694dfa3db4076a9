//! The antitrust-authority network: ground truth and the bundled fitted model.

use std::sync::OnceLock;

use mdss_core::oobn::AA_OUT;
use mdss_core::{ClassDoc, Evidence, InferenceSession, NetworkDoc};
use mdss_learning::synth::{self, AA_INTERVENTION, BUYER_POWER, ENTRY_BARRIERS, HHI_VARIATION, POST_MARKET_SHARE};
use mdss_learning::{em_fit, synth_aa_data, EmConfig};

use crate::error::Result;

/// Synthetic cases behind the bundled fitted model.
pub const FITTED_ROWS: usize = 100_000;
pub const FITTED_SEED: u64 = 6920;
/// Dirichlet pseudo-count of the bundled fit.
pub const FITTED_PSEUDO_COUNT: f64 = 0.1;

/// Fitted AA network: EM on synthetic cases over the ground-truth structure.
pub fn fitted_aa() -> &'static NetworkDoc {
    static FITTED: OnceLock<NetworkDoc> = OnceLock::new();
    FITTED.get_or_init(|| fit_aa(FITTED_ROWS, FITTED_SEED, FITTED_PSEUDO_COUNT).expect("bundled AA fit"))
}

/// Ground-truth network used by the synthetic generator.
pub fn ground_truth_aa() -> &'static NetworkDoc {
    static TRUTH: OnceLock<NetworkDoc> = OnceLock::new();
    TRUTH.get_or_init(|| synth::aa_ground_truth().expect("ground-truth AA network"))
}

pub fn fit_aa(rows: usize, seed: u64, pseudo_count: f64) -> Result<NetworkDoc> {
    let data = synth_aa_data(rows, seed)?;
    let cfg = EmConfig {
        pseudo_count,
        ..EmConfig::default()
    };
    let mut doc = em_fit(&synth::aa_structure(), &data, &cfg)?.network;
    doc.name = "AA".into();
    Ok(doc)
}

/// The AA network as a class exposing its intervention node.
pub fn aa_class(aa: &NetworkDoc) -> ClassDoc {
    let mut c = ClassDoc::from_network(aa);
    c.interface.outputs = vec![AA_OUT.to_string()];
    c
}

/// Market evidence of the first sweep condition.
pub fn e1() -> Vec<(&'static str, &'static str)> {
    vec![(POST_MARKET_SHARE, ">40%"), (ENTRY_BARRIERS, "Yes"), (BUYER_POWER, "Yes")]
}

/// Market evidence of the second sweep condition.
pub fn e2() -> Vec<(&'static str, &'static str)> {
    vec![(ENTRY_BARRIERS, "Yes"), (HHI_VARIATION, "[500,1000)")]
}

/// `P(AAIntervention = 1 | evidence)` under `aa`.
pub fn intervention_probability(aa: &NetworkDoc, evidence: &[(&str, &str)]) -> Result<f64> {
    let mut s = InferenceSession::from_doc(aa)?;
    for (node, state) in evidence {
        let var = aa.variable(node)?;
        s.set_evidence(Evidence::state(&var, state)?)?;
    }
    Ok(s.marginal(AA_INTERVENTION)?[1])
}
