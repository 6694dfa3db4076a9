//! A model with the analyst's evidence and stop-probability override.

use mdss_core::oobn::{aa_instance, stage_instance, AA_INSTANCE};
use mdss_core::{
    AlternativeEu, CoreError, DecisionProblem, DecisionResult, Evidence, EvidenceKind, FlatNetwork, InferenceSession,
    NetworkDoc, NodeKind, NodeSpec,
};
use serde::{Deserialize, Serialize};

use crate::catalog::{LoadedModel, ModelKind};
use crate::error::{ModelError, Result};
use crate::global::StopOverride;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceType {
    #[default]
    Hard,
    Likelihood,
}

/// Stage selector for stage-local nodes: a list of 1-based stages or `"all"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stages {
    List(Vec<usize>),
    Keyword(String),
}

/// One finding as entered by the analyst.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceInput {
    pub node: String,
    #[serde(default)]
    pub kind: EvidenceType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Stages>,
}

impl EvidenceInput {
    pub fn hard(node: &str, state: &str) -> Self {
        EvidenceInput {
            node: node.into(),
            kind: EvidenceType::Hard,
            value: Some(state.into()),
            weights: None,
            stages: None,
        }
    }

    pub fn likelihood(node: &str, weights: Vec<f64>) -> Self {
        EvidenceInput {
            node: node.into(),
            kind: EvidenceType::Likelihood,
            value: None,
            weights: Some(weights),
            stages: None,
        }
    }

    pub fn in_stages(mut self, stages: Stages) -> Self {
        self.stages = Some(stages);
        self
    }
}

/// An active finding, echoed in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceEcho {
    pub node: String,
    pub kind: EvidenceType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeMarginal {
    pub node: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarginalsReport {
    pub probability_of_evidence: f64,
    pub marginals: Vec<NodeMarginal>,
}

impl MarginalsReport {
    pub fn get(&self, node: &str) -> Option<&NodeMarginal> {
        self.marginals.iter().find(|m| m.node == node)
    }

    pub fn probability(&self, node: &str, state: &str) -> Option<f64> {
        let m = self.get(node)?;
        let i = m.states.iter().position(|s| s == state)?;
        Some(m.probabilities[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyStep {
    pub decision: String,
    pub choice: String,
}

/// First-decision summary of an influence-diagram evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecisionReport {
    pub decision: String,
    pub expected_utilities: Vec<AlternativeEu>,
    pub optimal: String,
    pub meu: f64,
    pub near_tie: bool,
    /// `|EU gap| / max |EU|` between the two best alternatives.
    pub relative_gap: f64,
    pub probability_of_evidence: f64,
    /// Optimal action sequence along the path where choices depend only on
    /// earlier decisions.
    pub optimal_path: Vec<PolicyStep>,
    /// Expected value of each utility node under the optimal policy.
    pub utilities: Vec<UtilityExpectation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityExpectation {
    pub node: String,
    pub expected: f64,
}

impl DecisionReport {
    pub fn from_result(r: &DecisionResult) -> Result<Self> {
        let best = r
            .best_first()
            .ok_or_else(|| ModelError::Invalid("model has no decision".into()))?
            .clone();
        let mut eus: Vec<f64> = r.first_decision_eus.iter().map(|a| a.eu).collect();
        eus.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let scale = eus.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let relative_gap = match eus.len() {
            0 | 1 => 0.0,
            _ if scale == 0.0 => 0.0,
            _ => (eus[0] - eus[1]) / scale,
        };
        Ok(DecisionReport {
            decision: r.first_decision.clone().unwrap_or_default(),
            expected_utilities: r.first_decision_eus.clone(),
            optimal: best.alternative,
            meu: r.meu,
            near_tie: r.near_tie,
            relative_gap,
            probability_of_evidence: r.probability_of_evidence,
            optimal_path: r
                .optimal_path()
                .into_iter()
                .map(|(decision, choice)| PolicyStep { decision, choice })
                .collect(),
            utilities: Vec::new(),
        })
    }

    pub fn eu(&self, alternative: &str) -> Option<f64> {
        self.expected_utilities.iter().find(|a| a.alternative == alternative).map(|a| a.eu)
    }
}

/// Single-writer view of one model.
#[derive(Clone, Debug)]
pub struct ModelSession {
    model: LoadedModel,
    flat: FlatNetwork,
    evidence: Vec<Evidence>,
    stop_override: Option<StopOverride>,
}

impl ModelSession {
    pub fn new(model: LoadedModel) -> Self {
        let flat = model.flat.clone();
        ModelSession {
            model,
            flat,
            evidence: Vec::new(),
            stop_override: None,
        }
    }

    pub fn model(&self) -> &LoadedModel {
        &self.model
    }

    pub fn network(&self) -> &NetworkDoc {
        &self.flat.doc
    }

    pub fn flat(&self) -> &FlatNetwork {
        &self.flat
    }

    pub fn stop_override(&self) -> Option<StopOverride> {
        self.stop_override
    }

    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    /// Qualified name of `node`: exact match first, then the first AA instance.
    pub fn resolve(&self, node: &str) -> Result<String> {
        let doc = &self.flat.doc;
        if doc.node(node).is_some() {
            return Ok(node.to_string());
        }
        let aa = format!("{AA_INSTANCE}_1.{node}");
        if doc.node(&aa).is_some() {
            return Ok(aa);
        }
        Err(CoreError::UnknownNode(node.to_string()).into())
    }

    fn targets(&self, input: &EvidenceInput) -> Result<Vec<String>> {
        match &input.stages {
            None => Ok(vec![self.resolve(&input.node)?]),
            Some(sel) => {
                let count = self.flat.stage_count();
                let stages: Vec<usize> = match sel {
                    Stages::Keyword(k) if k == "all" => (1..=count).collect(),
                    Stages::Keyword(k) => return Err(ModelError::Invalid(format!("unknown stage selector `{k}`"))),
                    Stages::List(v) => v.clone(),
                };
                stages
                    .into_iter()
                    .map(|k| {
                        [stage_instance(k), aa_instance(k)]
                            .iter()
                            .map(|inst| format!("{inst}.{}", input.node))
                            .find(|name| self.flat.doc.node(name).is_some())
                            .ok_or_else(|| {
                                CoreError::UnknownStageNode {
                                    stage: k,
                                    node: input.node.clone(),
                                }
                                .into()
                            })
                    })
                    .collect()
            }
        }
    }

    fn to_evidence(&self, node: &str, input: &EvidenceInput) -> Result<Evidence> {
        let spec = self.flat.doc.require(node)?;
        if spec.kind != NodeKind::Chance {
            return Err(CoreError::EvidenceOnDecision(node.to_string()).into());
        }
        let var = self.flat.doc.variable(node)?;
        let e = match input.kind {
            EvidenceType::Hard => {
                let label = input
                    .value
                    .as_deref()
                    .ok_or_else(|| ModelError::Invalid("hard evidence needs a `value`".into()))?;
                Evidence::state(&var, label)?
            }
            EvidenceType::Likelihood => {
                let w = input
                    .weights
                    .clone()
                    .ok_or_else(|| ModelError::Invalid("likelihood evidence needs `weights`".into()))?;
                Evidence::likelihood(node, w)
            }
        };
        e.weights(&var)?;
        Ok(e)
    }

    /// Enters (or replaces) findings.
    pub fn set_evidence(&mut self, input: &EvidenceInput) -> Result<Vec<String>> {
        let targets = self.targets(input)?;
        let new: Vec<Evidence> = targets.iter().map(|t| self.to_evidence(t, input)).collect::<Result<_>>()?;
        for e in new {
            match self.evidence.iter_mut().find(|x| x.node == e.node) {
                Some(slot) => *slot = e,
                None => self.evidence.push(e),
            }
        }
        Ok(targets)
    }

    /// Removes findings; returns the nodes that had one.
    pub fn retract(&mut self, node: &str, stages: Option<&Stages>) -> Result<Vec<String>> {
        let input = EvidenceInput {
            node: node.into(),
            kind: EvidenceType::Hard,
            value: None,
            weights: None,
            stages: stages.cloned(),
        };
        let targets = self.targets(&input)?;
        let before: Vec<String> = self.evidence.iter().map(|e| e.node.clone()).collect();
        self.evidence.retain(|e| !targets.contains(&e.node));
        Ok(targets.into_iter().filter(|t| before.contains(t)).collect())
    }

    pub fn clear_evidence(&mut self) {
        self.evidence.clear();
    }

    /// Replaces the AA stop signal by Bernoulli draws, or restores it.
    /// Fails when a finding sits on a node the replacement removes.
    pub fn override_stop(&mut self, stop: Option<StopOverride>) -> Result<()> {
        if let Some(s) = &stop {
            s.validate()?;
        }
        let flat = self.model.with_stop_override(stop)?;
        if let Some(e) = self.evidence.iter().find(|e| flat.doc.node(&e.node).is_none()) {
            return Err(ModelError::OverrideConflict(e.node.clone()));
        }
        self.flat = flat;
        self.stop_override = stop;
        Ok(())
    }

    pub fn evidence_echo(&self) -> Vec<EvidenceEcho> {
        self.evidence
            .iter()
            .map(|e| {
                let var = self.flat.doc.variable(&e.node).expect("evidence nodes exist");
                match &e.kind {
                    EvidenceKind::Hard(s) => EvidenceEcho {
                        node: e.node.clone(),
                        kind: EvidenceType::Hard,
                        state: Some(var.states()[*s].clone()),
                        weights: None,
                    },
                    EvidenceKind::Likelihood(w) => EvidenceEcho {
                        node: e.node.clone(),
                        kind: EvidenceType::Likelihood,
                        state: None,
                        weights: Some(w.clone()),
                    },
                }
            })
            .collect()
    }

    fn all_evidence(&self) -> Vec<Evidence> {
        let mut all = self.flat.finding_evidence();
        all.retain(|f| !self.evidence.iter().any(|e| e.node == f.node));
        all.extend(self.evidence.iter().cloned());
        all
    }

    pub fn decision_result(&self) -> Result<DecisionResult> {
        if self.model.kind != ModelKind::Decision {
            return Err(ModelError::Invalid(format!("model `{}` has no decisions", self.model.id)));
        }
        let dp = DecisionProblem::from_flat(&self.flat)?.with_findings(Vec::new());
        Ok(dp.evaluate(&self.all_evidence())?)
    }

    pub fn decision(&self) -> Result<DecisionReport> {
        let r = self.decision_result()?;
        let mut report = DecisionReport::from_result(&r)?;
        report.utilities = self.utility_expectations(&r)?;
        Ok(report)
    }

    fn utility_expectations(&self, r: &DecisionResult) -> Result<Vec<UtilityExpectation>> {
        let dp = DecisionProblem::from_flat(&self.flat)?;
        let mut doc = dp.policy_network(r)?;
        let utilities: Vec<&NodeSpec> = self.flat.doc.nodes.iter().filter(|n| n.kind == NodeKind::Utility).collect();
        // a constant child exposes the joint of the utility's parents
        let probe = |u: &str| format!("{u}#probe");
        for u in &utilities {
            let parents: Vec<&str> = u.parents.iter().map(String::as_str).collect();
            let configs: usize = u.parents.iter().map(|p| doc.require(p).map(|n| n.states.len())).product::<std::result::Result<usize, _>>()?;
            doc.nodes.push(NodeSpec::chance(probe(&u.name), &["a", "b"], &parents, vec![0.5; 2 * configs]));
        }
        let mut s = InferenceSession::from_doc(&doc)?;
        for e in self.all_evidence() {
            s.set_evidence(e)?;
        }
        utilities
            .iter()
            .map(|u| {
                let joint = s.family_marginal(&probe(&u.name))?.into_table();
                let table = self.flat.doc.utility_table(&u.name)?;
                let order: Vec<&str> = table.scope().iter().map(|v| v.name()).collect();
                let names: Vec<String> = joint.scope().iter().map(|v| v.name().to_string()).collect();
                let out: Vec<&str> = names.iter().map(String::as_str).filter(|n| !order.contains(n)).collect();
                let joint = joint.sum_out(&out)?.permute(&order)?;
                let total = joint.sum();
                let expected = joint.values().iter().zip(table.values()).map(|(p, u)| p * u).sum::<f64>() / total;
                Ok(UtilityExpectation {
                    node: u.name.clone(),
                    expected,
                })
            })
            .collect()
    }

    /// Probability of the analyst's findings given the model's built-in ones.
    pub fn probability_of_evidence(&self) -> Result<f64> {
        let (doc, mut s) = self.inference()?;
        self.relative_evidence(&doc, &mut s)
    }

    fn relative_evidence(&self, doc: &NetworkDoc, s: &mut InferenceSession) -> Result<f64> {
        let all = s.probability_of_evidence()?;
        let baked = self.flat.finding_evidence();
        if baked.is_empty() {
            return Ok(all);
        }
        let mut base = InferenceSession::from_doc(doc)?;
        for e in baked {
            base.set_evidence(e)?;
        }
        Ok(all / base.probability_of_evidence()?)
    }

    fn inference(&self) -> Result<(NetworkDoc, InferenceSession)> {
        let doc = match self.model.kind {
            ModelKind::Network => self.flat.doc.clone(),
            ModelKind::Decision => {
                let dp = DecisionProblem::from_flat(&self.flat)?;
                let r = self.decision_result()?;
                dp.policy_network(&r)?
            }
        };
        let mut s = InferenceSession::from_doc(&doc)?;
        for e in self.all_evidence() {
            s.set_evidence(e)?;
        }
        Ok((doc, s))
    }

    /// Posterior marginals; decisions follow their optimal policy.
    pub fn marginals(&self, nodes: &[String]) -> Result<MarginalsReport> {
        let (doc, mut s) = self.inference()?;
        let targets: Vec<String> = if nodes.is_empty() {
            doc.nodes.iter().map(|n| n.name.clone()).collect()
        } else {
            nodes.iter().map(|n| self.resolve(n)).collect::<Result<_>>()?
        };
        let refs: Vec<&str> = targets.iter().map(String::as_str).collect();
        let post = s.posterior_marginals(&refs)?;
        let probability_of_evidence = self.relative_evidence(&doc, &mut s)?;
        let marginals = targets
            .iter()
            .map(|t| {
                let var = doc.variable(t)?;
                Ok(NodeMarginal {
                    node: t.clone(),
                    states: var.states().to_vec(),
                    probabilities: post[t].clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(MarginalsReport {
            probability_of_evidence,
            marginals,
        })
    }
}
