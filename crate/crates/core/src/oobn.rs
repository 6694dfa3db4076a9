//! Object-oriented composition: classes with interface nodes, instances
//! joined by identity links, and compilation into a flat network.
//!
//! Identity links are compiled by substitution: an instance's bound input
//! node disappears and every reference to it is redirected to the source
//! node. Unbound inputs fall back to the prior declared on the interface.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::factor::Evidence;
use crate::network::{convert_nodes, syntax_error, NetworkDoc, NodeKind, NodeSpec, RawNode, TableSpec};

/// Instance-name prefix of the repeated-game stages (`Duopoly_1`, ...).
pub const STAGE_INSTANCE: &str = "Duopoly";
/// Instance-name prefix of the antitrust-authority instances.
pub const AA_INSTANCE: &str = "AA";
/// Stage input carrying the rival's current move.
pub const CARRY_IN: &str = "Firm1";
/// Stage output carrying the rival's move in the next stage.
pub const CARRY_OUT: &str = "Firm1Star";
/// Stage input carrying the termination signal.
pub const STOP_IN: &str = "Stop";
/// AA class output that drives termination.
pub const AA_OUT: &str = "AAIntervention";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDecl {
    pub name: String,
    pub states: Vec<String>,
    /// Distribution used when the input is left unbound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    #[serde(default)]
    pub inputs: Vec<InputDecl>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDecl {
    pub name: String,
    pub class: String,
    /// Input node -> source (`instance.output` or a node of the enclosing class).
    #[serde(default)]
    pub bind: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassDoc {
    pub name: String,
    #[serde(default)]
    pub interface: Interface,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub decision_order: Vec<String>,
    #[serde(default)]
    pub instances: Vec<InstanceDecl>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawClass {
    name: String,
    #[serde(default)]
    interface: Interface,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    decision_order: Vec<String>,
    #[serde(default)]
    instances: Vec<InstanceDecl>,
}

pub type Registry = BTreeMap<String, ClassDoc>;

/// Where a flat node came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Dot-joined instance path; empty for the root class.
    pub instance: String,
    /// Node name inside its class.
    pub node: String,
}

/// Finding compiled into the model (stage bootstraps, strategy parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakedFinding {
    pub stage: Option<usize>,
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatNetwork {
    pub doc: NetworkDoc,
    pub provenance: BTreeMap<String, Provenance>,
    #[serde(default)]
    pub findings: Vec<BakedFinding>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// One AA instance feeds the stop input of every stage.
    #[default]
    SharedAa,
    /// Each stage has its own AA instance.
    PerStageAa,
}

impl std::str::FromStr for Coupling {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-aa" | "shared" => Ok(Coupling::SharedAa),
            "per-stage-aa" | "per-stage" => Ok(Coupling::PerStageAa),
            other => Err(CoreError::Invalid(format!("unknown coupling `{other}`"))),
        }
    }
}

impl ClassDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawClass = serde_json::from_str(text).map_err(syntax_error)?;
        Ok(ClassDoc {
            name: raw.name,
            interface: raw.interface,
            nodes: convert_nodes(raw.nodes)?,
            decision_order: raw.decision_order,
            instances: raw.instances,
        })
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(self).expect("class documents always serialize")
    }

    /// A plain network viewed as a class with no interface.
    pub fn from_network(doc: &NetworkDoc) -> Self {
        ClassDoc {
            name: doc.name.clone(),
            interface: Interface::default(),
            nodes: doc.nodes.clone(),
            decision_order: doc.decision_order.clone(),
            instances: Vec::new(),
        }
    }

    pub fn input(&self, name: &str) -> Option<&InputDecl> {
        self.interface.inputs.iter().find(|i| i.name == name)
    }

    fn body(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    fn instance(&self, name: &str) -> Option<&InstanceDecl> {
        self.instances.iter().find(|i| i.name == name)
    }

    /// Expands nested instances into body nodes named `instance.node`,
    /// keeping the interface. Flattening the result equals flattening `self`.
    pub fn inline_instances(&self, registry: &Registry) -> Result<ClassDoc> {
        let inputs: BTreeMap<String, String> = self
            .interface
            .inputs
            .iter()
            .map(|i| (i.name.clone(), i.name.clone()))
            .collect();
        let mut out = Emit::default();
        flatten_into(self, "", "", &inputs, registry, &mut out, &mut Vec::new())?;
        let decision_order = decision_order_of(self, "", registry)?;
        Ok(ClassDoc {
            name: self.name.clone(),
            interface: self.interface.clone(),
            nodes: out.nodes,
            decision_order,
            instances: Vec::new(),
        })
    }
}

#[derive(Default)]
struct Emit {
    nodes: Vec<NodeSpec>,
    provenance: BTreeMap<String, Provenance>,
}

/// Resolves a reference inside `class` to (flat name, states).
fn resolve(
    class: &ClassDoc,
    prefix: &str,
    inputs: &BTreeMap<String, String>,
    registry: &Registry,
    name: &str,
) -> Option<(String, Vec<String>)> {
    if let Some(decl) = class.input(name) {
        return inputs.get(name).map(|flat| (flat.clone(), decl.states.clone()));
    }
    if let Some(n) = class.body(name) {
        return Some((format!("{prefix}{name}"), n.states.clone()));
    }
    let (inst, out) = name.split_once('.')?;
    let decl = class.instance(inst)?;
    let sub = registry.get(&decl.class)?;
    if !sub.interface.outputs.iter().any(|o| o == out) {
        return None;
    }
    let node = sub.body(out)?;
    Some((format!("{prefix}{inst}.{out}"), node.states.clone()))
}

fn check_instance_cycles(class: &ClassDoc) -> Result<()> {
    // edge source-instance -> target-instance for every instance-to-instance binding
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for inst in &class.instances {
        let e = deps.entry(inst.name.as_str()).or_default();
        for src in inst.bind.values() {
            if let Some((from, _)) = src.split_once('.') {
                if class.instance(from).is_some() {
                    e.insert(from);
                }
            }
        }
    }
    fn visit<'a>(
        n: &'a str,
        deps: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> std::result::Result<(), String> {
        match state.get(n) {
            Some(2) => return Ok(()),
            Some(1) => return Err(n.to_string()),
            _ => {}
        }
        state.insert(n, 1);
        for d in deps.get(n).into_iter().flatten() {
            visit(d, deps, state)?;
        }
        state.insert(n, 2);
        Ok(())
    }
    let mut state = BTreeMap::new();
    for n in deps.keys() {
        visit(n, &deps, &mut state).map_err(CoreError::InstanceCycle)?;
    }
    Ok(())
}

fn flatten_into(
    class: &ClassDoc,
    prefix: &str,
    path: &str,
    inputs: &BTreeMap<String, String>,
    registry: &Registry,
    out: &mut Emit,
    stack: &mut Vec<String>,
) -> Result<()> {
    if stack.contains(&class.name) {
        return Err(CoreError::InstanceCycle(class.name.clone()));
    }
    stack.push(class.name.clone());
    check_instance_cycles(class)?;

    for inst in &class.instances {
        let sub = registry
            .get(&inst.class)
            .ok_or_else(|| CoreError::UnresolvedClass(inst.class.clone()))?;
        for key in inst.bind.keys() {
            if sub.input(key).is_none() {
                return Err(CoreError::BadBinding {
                    instance: inst.name.clone(),
                    input: key.clone(),
                    source_node: inst.bind[key].clone(),
                });
            }
        }
        let sub_prefix = format!("{prefix}{}.", inst.name);
        let sub_path = if path.is_empty() {
            inst.name.clone()
        } else {
            format!("{path}.{}", inst.name)
        };
        let mut sub_inputs = BTreeMap::new();
        for decl in &sub.interface.inputs {
            match inst.bind.get(&decl.name) {
                Some(src) => {
                    let (flat, states) =
                        resolve(class, prefix, inputs, registry, src).ok_or_else(|| CoreError::BadBinding {
                            instance: inst.name.clone(),
                            input: decl.name.clone(),
                            source_node: src.clone(),
                        })?;
                    if states != decl.states {
                        return Err(CoreError::LinkStateMismatch {
                            source_node: src.clone(),
                            target: format!("{}.{}", inst.name, decl.name),
                        });
                    }
                    sub_inputs.insert(decl.name.clone(), flat);
                }
                None => {
                    let prior = decl.prior.clone().ok_or_else(|| CoreError::UnboundInput {
                        instance: inst.name.clone(),
                        input: decl.name.clone(),
                    })?;
                    let flat = format!("{sub_prefix}{}", decl.name);
                    out.nodes.push(NodeSpec {
                        name: flat.clone(),
                        kind: NodeKind::Chance,
                        states: decl.states.clone(),
                        parents: Vec::new(),
                        table: Some(TableSpec::Explicit { values: prior }),
                    });
                    out.provenance.insert(
                        flat.clone(),
                        Provenance {
                            instance: sub_path.clone(),
                            node: decl.name.clone(),
                        },
                    );
                    sub_inputs.insert(decl.name.clone(), flat);
                }
            }
        }
        flatten_into(sub, &sub_prefix, &sub_path, &sub_inputs, registry, out, stack)?;
    }

    for node in &class.nodes {
        let lookup = |r: &str| -> Result<String> {
            resolve(class, prefix, inputs, registry, r)
                .map(|(n, _)| n)
                .ok_or_else(|| CoreError::DanglingParent {
                    node: format!("{prefix}{}", node.name),
                    parent: r.to_string(),
                })
        };
        let parents = node.parents.iter().map(|p| lookup(p)).collect::<Result<Vec<_>>>()?;
        let table = match &node.table {
            Some(TableSpec::Expression { expr }) => {
                for r in expr.references() {
                    lookup(r)?;
                }
                let renamed = expr.rename(&|r| lookup(r).expect("checked above"));
                Some(TableSpec::Expression { expr: renamed })
            }
            other => other.clone(),
        };
        let flat = format!("{prefix}{}", node.name);
        out.nodes.push(NodeSpec {
            name: flat.clone(),
            kind: node.kind,
            states: node.states.clone(),
            parents,
            table,
        });
        out.provenance.insert(
            flat,
            Provenance {
                instance: path.to_string(),
                node: node.name.clone(),
            },
        );
    }
    stack.pop();
    Ok(())
}

fn decision_order_of(class: &ClassDoc, prefix: &str, registry: &Registry) -> Result<Vec<String>> {
    if !class.decision_order.is_empty() {
        return Ok(class
            .decision_order
            .iter()
            .map(|d| format!("{prefix}{d}"))
            .collect());
    }
    let mut order = Vec::new();
    for inst in &class.instances {
        let sub = registry
            .get(&inst.class)
            .ok_or_else(|| CoreError::UnresolvedClass(inst.class.clone()))?;
        order.extend(decision_order_of(sub, &format!("{prefix}{}.", inst.name), registry)?);
    }
    order.extend(
        class
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Decision)
            .map(|n| format!("{prefix}{}", n.name)),
    );
    Ok(order)
}

/// Compiles `root` and everything it instantiates into one network.
pub fn flatten(root: &ClassDoc, registry: &Registry) -> Result<FlatNetwork> {
    let inputs: BTreeMap<String, String> = BTreeMap::new();
    if let Some(i) = root.interface.inputs.iter().find(|i| i.prior.is_none()) {
        return Err(CoreError::UnboundInput {
            instance: root.name.clone(),
            input: i.name.clone(),
        });
    }
    // root inputs behave like unbound inputs of a top-level instance
    let mut out = Emit::default();
    let mut root_inputs = inputs;
    for decl in &root.interface.inputs {
        out.nodes.push(NodeSpec {
            name: decl.name.clone(),
            kind: NodeKind::Chance,
            states: decl.states.clone(),
            parents: Vec::new(),
            table: Some(TableSpec::Explicit {
                values: decl.prior.clone().expect("checked above"),
            }),
        });
        out.provenance.insert(
            decl.name.clone(),
            Provenance {
                instance: String::new(),
                node: decl.name.clone(),
            },
        );
        root_inputs.insert(decl.name.clone(), decl.name.clone());
    }
    flatten_into(root, "", "", &root_inputs, registry, &mut out, &mut Vec::new())?;
    let decision_order = decision_order_of(root, "", registry)?;
    let doc = NetworkDoc::new(root.name.clone(), out.nodes, decision_order);
    let report = doc.validate();
    if !report.ok {
        let msg = report
            .findings
            .iter()
            .map(|f| format!("{}: {}", f.code, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CoreError::InvalidNetwork(msg));
    }
    Ok(FlatNetwork {
        doc,
        provenance: out.provenance,
        findings: Vec::new(),
    })
}

pub fn stage_instance(stage: usize) -> String {
    format!("{STAGE_INSTANCE}_{stage}")
}

pub fn aa_instance(stage: usize) -> String {
    format!("{AA_INSTANCE}_{stage}")
}

/// Root class chaining `n_stages + 1` stage instances. `aa_classes` holds
/// either one class (used for every AA instance) or one per AA instance.
pub fn repeated_root(
    stage: &ClassDoc,
    aa_classes: &[&ClassDoc],
    n_stages: usize,
    coupling: Coupling,
) -> Result<ClassDoc> {
    if n_stages < 1 {
        return Err(CoreError::Invalid("at least one repetition is required".into()));
    }
    let n_inst = n_stages + 1;
    if stage.input(CARRY_IN).is_none() || !stage.interface.outputs.iter().any(|o| o == CARRY_OUT) {
        return Err(CoreError::InterfaceMismatch(format!(
            "stage class `{}` must expose input `{CARRY_IN}` and output `{CARRY_OUT}`",
            stage.name
        )));
    }
    let carry_in = stage.input(CARRY_IN).unwrap();
    let carry_out = stage.body(CARRY_OUT).ok_or_else(|| {
        CoreError::InterfaceMismatch(format!("output `{CARRY_OUT}` is not a body node"))
    })?;
    if carry_in.states != carry_out.states {
        return Err(CoreError::InterfaceMismatch(format!(
            "`{CARRY_IN}` and `{CARRY_OUT}` must share states"
        )));
    }
    let mut instances = Vec::new();
    let aa_count = match coupling {
        Coupling::SharedAa => 1,
        Coupling::PerStageAa => n_inst,
    };
    if !aa_classes.is_empty() {
        if stage.input(STOP_IN).is_none() {
            return Err(CoreError::InterfaceMismatch(format!(
                "stage class `{}` has no `{STOP_IN}` input",
                stage.name
            )));
        }
        if aa_classes.len() != 1 && aa_classes.len() != aa_count {
            return Err(CoreError::InterfaceMismatch(format!(
                "{} AA classes supplied for {aa_count} AA instances",
                aa_classes.len()
            )));
        }
        for (i, aa) in aa_classes.iter().enumerate() {
            if !aa.interface.outputs.iter().any(|o| o == AA_OUT) {
                return Err(CoreError::InterfaceMismatch(format!(
                    "AA class `{}` (#{}) must expose `{AA_OUT}`",
                    aa.name,
                    i + 1
                )));
            }
        }
        for k in 1..=aa_count {
            let class = if aa_classes.len() == 1 {
                aa_classes[0]
            } else {
                aa_classes[k - 1]
            };
            instances.push(InstanceDecl {
                name: aa_instance(k),
                class: class.name.clone(),
                bind: BTreeMap::new(),
            });
        }
    }
    for k in 1..=n_inst {
        let mut bind = BTreeMap::new();
        if k > 1 {
            bind.insert(CARRY_IN.to_string(), format!("{}.{CARRY_OUT}", stage_instance(k - 1)));
        }
        if !aa_classes.is_empty() {
            let aa = match coupling {
                Coupling::SharedAa => aa_instance(1),
                Coupling::PerStageAa => aa_instance(k),
            };
            bind.insert(STOP_IN.to_string(), format!("{aa}.{AA_OUT}"));
        }
        instances.push(InstanceDecl {
            name: stage_instance(k),
            class: stage.name.clone(),
            bind,
        });
    }
    Ok(ClassDoc {
        name: format!("{}x{}", stage.name, n_inst),
        interface: Interface::default(),
        nodes: Vec::new(),
        decision_order: (1..=n_inst)
            .map(|k| format!("{}.{}", stage_instance(k), decision_of(stage)))
            .collect(),
        instances,
    })
}

fn decision_of(stage: &ClassDoc) -> String {
    stage
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::Decision)
        .map(|n| n.name.clone())
        .unwrap_or_default()
}

/// Unrolls `n_stages` repetitions (`n_stages + 1` stage instances), binding
/// each stage's stop input to an AA instance per `coupling`. Without an AA
/// class the stage class must produce its own stop signal.
pub fn unroll_repeated(
    stage: &ClassDoc,
    aa: Option<&ClassDoc>,
    n_stages: usize,
    coupling: Coupling,
) -> Result<FlatNetwork> {
    let aa_classes: Vec<&ClassDoc> = aa.into_iter().collect();
    unroll_repeated_with(stage, &aa_classes, n_stages, coupling)
}

/// As [`unroll_repeated`], with possibly different AA classes per instance.
pub fn unroll_repeated_with(
    stage: &ClassDoc,
    aa_classes: &[&ClassDoc],
    n_stages: usize,
    coupling: Coupling,
) -> Result<FlatNetwork> {
    if stage.nodes.iter().filter(|n| n.kind == NodeKind::Decision).count() != 1 {
        return Err(CoreError::InterfaceMismatch(format!(
            "stage class `{}` must hold exactly one decision",
            stage.name
        )));
    }
    let root = repeated_root(stage, aa_classes, n_stages, coupling)?;
    let mut registry = Registry::new();
    registry.insert(stage.name.clone(), stage.clone());
    for aa in aa_classes {
        registry.insert(aa.name.clone(), (*aa).clone());
    }
    flatten(&root, &registry)
}

impl FlatNetwork {
    pub fn from_network(doc: NetworkDoc) -> Self {
        let provenance = doc
            .nodes
            .iter()
            .map(|n| {
                (
                    n.name.clone(),
                    Provenance {
                        instance: String::new(),
                        node: n.name.clone(),
                    },
                )
            })
            .collect();
        FlatNetwork {
            doc,
            provenance,
            findings: Vec::new(),
        }
    }

    /// Number of stage instances in an unrolled network.
    pub fn stage_count(&self) -> usize {
        (1..)
            .take_while(|k| {
                let p = format!("{}.", stage_instance(*k));
                self.doc.nodes.iter().any(|n| n.name.starts_with(&p))
            })
            .count()
    }

    fn stage_node(&self, stage: usize, node: &str) -> Result<String> {
        let name = format!("{}.{node}", stage_instance(stage));
        if self.doc.node(&name).is_some() {
            Ok(name)
        } else {
            Err(CoreError::UnknownStageNode {
                stage,
                node: node.to_string(),
            })
        }
    }

    /// Records a finding on `node` of stage `stage`, replacing any earlier
    /// finding on the same node.
    pub fn with_stage_finding(&self, stage: usize, node: &str, kind: crate::factor::EvidenceKind) -> Result<FlatNetwork> {
        let name = self.stage_node(stage, node)?;
        let var = self.doc.variable(&name)?;
        let evidence = Evidence { node: name, kind };
        evidence.weights(&var)?;
        let mut out = self.clone();
        out.findings.retain(|f| f.evidence.node != evidence.node);
        out.findings.push(BakedFinding {
            stage: Some(stage),
            evidence,
        });
        Ok(out)
    }

    /// Bakes a hard finding `node = state` into stage `stage`.
    pub fn set_stage_override(&self, stage: usize, node: &str, state: &str) -> Result<FlatNetwork> {
        let name = self.stage_node(stage, node)?;
        let var = self.doc.variable(&name)?;
        let idx = var.state_index(state).ok_or_else(|| CoreError::UnknownState {
            node: name.clone(),
            state: state.to_string(),
        })?;
        self.with_stage_finding(stage, node, crate::factor::EvidenceKind::Hard(idx))
    }

    pub fn retract_stage_override(&self, stage: usize, node: &str) -> Result<FlatNetwork> {
        let name = self.stage_node(stage, node)?;
        let mut out = self.clone();
        out.findings.retain(|f| f.evidence.node != name);
        Ok(out)
    }

    pub fn finding_evidence(&self) -> Vec<Evidence> {
        self.findings.iter().map(|f| f.evidence.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CptExpr;

    const MOVES: [&str; 3] = ["defect", "cooperate", "stop"];

    fn stage_class() -> ClassDoc {
        ClassDoc {
            name: "Duopoly".into(),
            interface: Interface {
                inputs: vec![
                    InputDecl {
                        name: CARRY_IN.into(),
                        states: MOVES.iter().map(|s| s.to_string()).collect(),
                        prior: Some(vec![0.5, 0.5, 0.0]),
                    },
                    InputDecl {
                        name: STOP_IN.into(),
                        states: vec!["0".into(), "1".into()],
                        prior: Some(vec![1.0, 0.0]),
                    },
                ],
                outputs: vec![CARRY_OUT.into()],
            },
            nodes: vec![
                NodeSpec::decision("Firm2", &["defect", "cooperate"]),
                NodeSpec::utility("U2", &["Firm1", "Firm2"], vec![0.0, -10.0, 150.0, 100.0, 0.0, 0.0]),
                NodeSpec::expression(
                    CARRY_OUT,
                    &MOVES,
                    &["Stop", "Firm2"],
                    CptExpr::if_eq("Stop", "1", CptExpr::constant("stop"), CptExpr::copy("Firm2")),
                ),
            ],
            decision_order: vec!["Firm2".into()],
            instances: vec![],
        }
    }

    fn aa_class() -> ClassDoc {
        ClassDoc {
            name: "AA".into(),
            interface: Interface {
                inputs: vec![],
                outputs: vec![AA_OUT.into()],
            },
            nodes: vec![NodeSpec::chance(AA_OUT, &["0", "1"], &[], vec![0.9, 0.1])],
            decision_order: vec![],
            instances: vec![],
        }
    }

    #[test]
    fn class_without_instances_flattens_to_its_body() {
        let a = aa_class();
        let flat = flatten(&a, &Registry::new()).unwrap();
        assert_eq!(flat.doc.nodes, a.nodes);
    }

    #[test]
    fn two_stage_chain_merges_carry_nodes() {
        let flat = unroll_repeated(&stage_class(), None, 1, Coupling::SharedAa).unwrap();
        let d2 = flat.doc.node("Duopoly_2.U2").unwrap();
        assert_eq!(d2.parents, vec!["Duopoly_1.Firm1Star", "Duopoly_2.Firm2"]);
        assert!(flat.doc.node("Duopoly_2.Firm1").is_none());
        assert_eq!(flat.doc.decision_order, vec!["Duopoly_1.Firm2", "Duopoly_2.Firm2"]);
    }

    #[test]
    fn shared_and_per_stage_coupling_bind_stop() {
        let s = stage_class();
        let a = aa_class();
        let shared = unroll_repeated(&s, Some(&a), 3, Coupling::SharedAa).unwrap();
        let per = unroll_repeated(&s, Some(&a), 3, Coupling::PerStageAa).unwrap();
        assert_eq!(shared.stage_count(), 4);
        for k in 1..=4 {
            let star = shared.doc.node(&format!("Duopoly_{k}.Firm1Star")).unwrap();
            assert_eq!(star.parents[0], "AA_1.AAIntervention");
            let star = per.doc.node(&format!("Duopoly_{k}.Firm1Star")).unwrap();
            assert_eq!(star.parents[0], format!("AA_{k}.AAIntervention"));
        }
        assert_eq!(shared.doc.names_of(NodeKind::Utility).len(), 4);
        assert_eq!(per.doc.names_of(NodeKind::Decision).len(), 4);
    }

    #[test]
    fn bad_bindings_are_reported() {
        let mut root = repeated_root(&stage_class(), &[], 1, Coupling::SharedAa).unwrap();
        let mut reg = Registry::new();
        reg.insert("Duopoly".into(), stage_class());
        root.instances[1]
            .bind
            .insert(CARRY_IN.into(), "Duopoly_1.Nope".into());
        assert!(matches!(flatten(&root, &reg), Err(CoreError::BadBinding { .. })));

        root.instances[1].bind.insert(CARRY_IN.into(), "Duopoly_1.Firm1Star".into());
        root.instances[0].bind.insert(CARRY_IN.into(), "Duopoly_2.Firm1Star".into());
        assert!(matches!(flatten(&root, &reg), Err(CoreError::InstanceCycle(_))));

        let mut root2 = repeated_root(&stage_class(), &[], 1, Coupling::SharedAa).unwrap();
        root2.instances[0].class = "Missing".into();
        assert!(matches!(flatten(&root2, &reg), Err(CoreError::UnresolvedClass(_))));
    }

    #[test]
    fn link_type_mismatch_is_rejected() {
        let mut s = stage_class();
        s.interface.inputs[1].states = vec!["no".into(), "yes".into()];
        let e = unroll_repeated(&s, Some(&aa_class()), 1, Coupling::SharedAa).unwrap_err();
        assert!(matches!(e, CoreError::LinkStateMismatch { .. }));
    }

    #[test]
    fn overrides_are_recorded_and_retracted() {
        let flat = unroll_repeated(&stage_class(), None, 2, Coupling::SharedAa).unwrap();
        let o = flat.set_stage_override(1, "Firm1", "cooperate").unwrap();
        assert_eq!(o.findings.len(), 1);
        assert_eq!(o.findings[0].evidence, Evidence::hard("Duopoly_1.Firm1", 1));
        assert_eq!(o.retract_stage_override(1, "Firm1").unwrap(), flat);
        assert!(flat.set_stage_override(9, "Firm1", "cooperate").is_err());
        assert!(flat.set_stage_override(1, "Firm1", "maybe").is_err());
    }

    #[test]
    fn zero_repetitions_is_an_error() {
        assert!(unroll_repeated(&stage_class(), None, 0, Coupling::SharedAa).is_err());
    }

    #[test]
    fn class_documents_round_trip() {
        let root = repeated_root(&stage_class(), &[&aa_class()], 2, Coupling::PerStageAa).unwrap();
        assert_eq!(ClassDoc::parse(&root.serialize()).unwrap(), root);
        let s = stage_class();
        assert_eq!(ClassDoc::parse(&s.serialize()).unwrap(), s);
    }
}
