//! Scenario documents: a model, an ordered list of evidence operations,
//! queries and reference values to compare against.

use std::fmt::Write as _;

use mdss_core::{Coupling, NetworkDoc};
use serde::{Deserialize, Serialize};

use crate::catalog::{LoadedModel, ModelRequest, PayoffChoice, StrategyChoice};
use crate::error::{ModelError, Result};
use crate::global::StopOverride;
use crate::pd::StopRule;
use crate::session::{DecisionReport, EvidenceEcho, EvidenceInput, MarginalsReport, ModelSession, Stages};

/// Bundled model id or an inline network document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Bundled(String),
    Inline(Box<NetworkDoc>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Unroll {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RetractArgs {
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Stages>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "kebab-case")]
pub enum Step {
    Set(EvidenceInput),
    Retract(RetractArgs),
    OverrideStop(StopOverride),
    RestoreStop,
    Clear,
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Set(_) => "set",
            Step::Retract(_) => "retract",
            Step::OverrideStop(_) => "override-stop",
            Step::RestoreStop => "restore-stop",
            Step::Clear => "clear",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Query {
    Marginals {
        #[serde(default)]
        nodes: Vec<String>,
    },
    Decision,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefMode {
    Assert,
    #[default]
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RefValue {
    Number(f64),
    Label(String),
}

/// Default absolute tolerance of numeric assertions.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// A published value to compare with the computed one.
///
/// `quantity` is `P(Node=state)`, `EU(alternative)` or `optimal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Reference {
    pub quantity: String,
    pub value: RefValue,
    #[serde(default)]
    pub mode: RefMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unroll: Option<Unroll>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_rule: Option<StopRule>,
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default)]
    pub queries: Vec<Query>,
    #[serde(default)]
    pub references: Vec<Reference>,
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn request(&self) -> Option<ModelRequest> {
        match &self.model {
            ModelRef::Bundled(id) => Some(ModelRequest {
                model: id.clone(),
                stages: self.unroll.as_ref().and_then(|u| u.stages),
                coupling: self.unroll.as_ref().and_then(|u| u.coupling),
                strategy: self.strategy.clone(),
                payoff: self.payoff.clone(),
                stop_rule: self.stop_rule,
            }),
            ModelRef::Inline(_) => None,
        }
    }

    pub fn load(&self) -> Result<LoadedModel> {
        match &self.model {
            ModelRef::Bundled(_) => LoadedModel::load(&self.request().expect("bundled")),
            ModelRef::Inline(doc) => LoadedModel::from_doc((**doc).clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum QueryResult {
    Marginals(MarginalsReport),
    Decision(DecisionReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceRow {
    pub quantity: String,
    pub reference_value: RefValue,
    pub computed: RefValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    pub mode: RefMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// `None` for report-mode rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub name: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_override: Option<StopOverride>,
    pub evidence: Vec<EvidenceEcho>,
    pub probability_of_evidence: f64,
    pub results: Vec<QueryResult>,
    pub references: Vec<ReferenceRow>,
    /// Every assert-mode reference holds.
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn reference(&self, quantity: &str) -> Option<&ReferenceRow> {
        self.references.iter().find(|r| r.quantity == quantity)
    }

    pub fn decision(&self) -> Option<&DecisionReport> {
        self.results.iter().find_map(|r| match r {
            QueryResult::Decision(d) => Some(d),
            QueryResult::Marginals(_) => None,
        })
    }

    pub fn marginals(&self) -> Option<&MarginalsReport> {
        self.results.iter().find_map(|r| match r {
            QueryResult::Marginals(m) => Some(m),
            QueryResult::Decision(_) => None,
        })
    }

    /// Plain-text rendering; probabilities as percentages.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}  (model {})", self.name, self.model);
        if let Some(o) = &self.stop_override {
            let _ = writeln!(out, "stop override: p = {:.4}, later stages {:.4}", o.p, o.later());
        }
        if self.evidence.is_empty() {
            let _ = writeln!(out, "evidence: none");
        } else {
            let _ = writeln!(out, "evidence:");
            for e in &self.evidence {
                match (&e.state, &e.weights) {
                    (Some(s), _) => {
                        let _ = writeln!(out, "  {} = {}", e.node, s);
                    }
                    (None, Some(w)) => {
                        let w: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
                        let _ = writeln!(out, "  {} ~ [{}]", e.node, w.join(", "));
                    }
                    (None, None) => {}
                }
            }
        }
        let _ = writeln!(out, "P(evidence) = {:.6}", self.probability_of_evidence);
        for r in &self.results {
            match r {
                QueryResult::Marginals(m) => out.push_str(&render_marginals(m)),
                QueryResult::Decision(d) => out.push_str(&render_decision(d)),
            }
        }
        if !self.references.is_empty() {
            let _ = writeln!(out, "references:");
            let _ = writeln!(
                out,
                "  {:<34} {:>10} {:>10} {:>9}  {:<6} {:<4}  note",
                "quantity", "reference", "computed", "rel.err", "mode", "ok"
            );
            for row in &self.references {
                let rel = row.rel_error.map_or("-".to_string(), |e| format!("{:.2}%", 100.0 * e));
                let ok = match row.pass {
                    Some(true) => "yes",
                    Some(false) => "NO",
                    None => "-",
                };
                let mode = match row.mode {
                    RefMode::Assert => "assert",
                    RefMode::Report => "report",
                };
                let _ = writeln!(
                    out,
                    "  {:<34} {:>10} {:>10} {:>9}  {:<6} {:<4}  {}",
                    row.quantity,
                    show(&row.reference_value),
                    show(&row.computed),
                    rel,
                    mode,
                    ok,
                    row.note
                );
            }
        }
        let _ = writeln!(out, "result: {}", if self.passed { "pass" } else { "FAIL" });
        out
    }
}

fn show(v: &RefValue) -> String {
    match v {
        RefValue::Number(x) => format!("{x:.4}"),
        RefValue::Label(s) => s.clone(),
    }
}

pub fn render_marginals(m: &MarginalsReport) -> String {
    let mut out = String::new();
    for n in &m.marginals {
        let _ = writeln!(out, "{}", n.node);
        for (s, p) in n.states.iter().zip(&n.probabilities) {
            let _ = writeln!(out, "  {:<16} {:>7.2}%", s, 100.0 * p);
        }
    }
    out
}

pub fn render_decision(d: &DecisionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "decision {}:", d.decision);
    for a in &d.expected_utilities {
        let mark = if a.alternative == d.optimal { " *" } else { "" };
        let _ = writeln!(out, "  EU({}) = {:.2}{}", a.alternative, a.eu, mark);
    }
    let _ = writeln!(
        out,
        "  optimal: {}  (relative gap {:.4}{})",
        d.optimal,
        d.relative_gap,
        if d.near_tie { ", near tie" } else { "" }
    );
    if !d.optimal_path.is_empty() {
        let path: Vec<String> = d.optimal_path.iter().map(|s| format!("{}={}", s.decision, s.choice)).collect();
        let _ = writeln!(out, "  policy: {}", path.join(", "));
    }
    out
}

/// Parses `P(Node=state)` or `EU(alternative)`.
fn parse_quantity(q: &str) -> Option<(&str, &str)> {
    let q = q.trim();
    let inner = |prefix: &str| q.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
    if let Some(body) = inner("P(") {
        let (node, state) = body.split_once('=')?;
        return Some((node.trim(), state.trim()));
    }
    inner("EU(").map(|alt| ("EU", alt.trim()))
}

/// Computed value of a reference quantity.
pub fn evaluate_quantity(session: &ModelSession, quantity: &str, decision: &mut Option<DecisionReport>) -> Result<RefValue> {
    let mut decide = || -> Result<DecisionReport> {
        if decision.is_none() {
            *decision = Some(session.decision()?);
        }
        Ok(decision.clone().expect("just set"))
    };
    if quantity.trim() == "optimal" {
        return Ok(RefValue::Label(decide()?.optimal));
    }
    match parse_quantity(quantity) {
        Some(("EU", alt)) => decide()?
            .eu(alt)
            .map(RefValue::Number)
            .ok_or_else(|| ModelError::UnknownQuantity(quantity.to_string())),
        Some((node, state)) => {
            let node = session.resolve(node)?;
            let m = session.marginals(std::slice::from_ref(&node))?;
            m.probability(&node, state)
                .map(RefValue::Number)
                .ok_or_else(|| ModelError::UnknownQuantity(quantity.to_string()))
        }
        None => Err(ModelError::UnknownQuantity(quantity.to_string())),
    }
}

fn compare(r: &Reference, computed: RefValue) -> Result<ReferenceRow> {
    let tolerance = match (&r.value, r.mode) {
        (RefValue::Number(_), RefMode::Assert) => Some(r.tolerance.unwrap_or(DEFAULT_TOLERANCE)),
        _ => r.tolerance,
    };
    let (abs_error, rel_error, ok) = match (&r.value, &computed) {
        (RefValue::Number(p), RefValue::Number(c)) => {
            let abs = (c - p).abs();
            let rel = if *p == 0.0 { None } else { Some(abs / p.abs()) };
            (Some(abs), rel, abs <= tolerance.unwrap_or(DEFAULT_TOLERANCE))
        }
        (RefValue::Label(p), RefValue::Label(c)) => (None, None, p == c),
        _ => {
            return Err(ModelError::Invalid(format!(
                "reference `{}` compares a label with a number",
                r.quantity
            )))
        }
    };
    Ok(ReferenceRow {
        quantity: r.quantity.clone(),
        reference_value: r.value.clone(),
        computed,
        abs_error,
        rel_error,
        mode: r.mode,
        tolerance,
        pass: (r.mode == RefMode::Assert).then_some(ok),
        note: r.note.clone(),
    })
}

pub fn apply_step(session: &mut ModelSession, step: &Step) -> Result<()> {
    match step {
        Step::Set(e) => session.set_evidence(e).map(|_| ()),
        Step::Retract(a) => session.retract(&a.node, a.stages.as_ref()).map(|_| ()),
        Step::OverrideStop(o) => session.override_stop(Some(*o)),
        Step::RestoreStop => session.override_stop(None),
        Step::Clear => {
            session.clear_evidence();
            Ok(())
        }
    }
}

/// Runs `doc` on a fresh session; errors name the failing step (1-based).
pub fn run_scenario(doc: &ScenarioDoc) -> Result<Report> {
    let model = doc.load()?;
    let mut session = ModelSession::new(model);
    for (i, step) in doc.steps.iter().enumerate() {
        apply_step(&mut session, step).map_err(|e| ModelError::Step {
            step: i + 1,
            op: step.name().to_string(),
            source: Box::new(e),
        })?;
    }
    report_for(&session, doc)
}

/// Executes the queries and references of `doc` against `session` as it stands.
pub fn report_for(session: &ModelSession, doc: &ScenarioDoc) -> Result<Report> {
    let mut decision: Option<DecisionReport> = None;
    let mut results = Vec::with_capacity(doc.queries.len());
    for q in &doc.queries {
        results.push(match q {
            Query::Marginals { nodes } => QueryResult::Marginals(session.marginals(nodes)?),
            Query::Decision => {
                let d = session.decision()?;
                decision = Some(d.clone());
                QueryResult::Decision(d)
            }
        });
    }
    let probability_of_evidence = match results.iter().find_map(|r| match r {
        QueryResult::Marginals(m) => Some(m.probability_of_evidence),
        QueryResult::Decision(_) => None,
    }) {
        Some(p) => p,
        None => session.probability_of_evidence()?,
    };
    let references = doc
        .references
        .iter()
        .map(|r| compare(r, evaluate_quantity(session, &r.quantity, &mut decision)?))
        .collect::<Result<Vec<_>>>()?;
    let passed = references.iter().all(|r| r.pass != Some(false));
    Ok(Report {
        name: doc.name.clone(),
        model: session.model().id.clone(),
        stop_override: session.stop_override(),
        evidence: session.evidence_echo(),
        probability_of_evidence,
        results,
        references,
        passed,
    })
}
