//! Network documents: declared chance, decision and utility nodes with their
//! tables, plus validation and the JSON document format.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::expr::CptExpr;
use crate::factor::{Cpt, Table, Variable, ROW_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Decision,
    Utility,
}

impl NodeKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "chance" => Some(NodeKind::Chance),
            "decision" => Some(NodeKind::Decision),
            "utility" => Some(NodeKind::Utility),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TableSpec {
    /// Flat CPT over `parents ++ [node]`, first parent slowest.
    Explicit { values: Vec<f64> },
    /// Real-valued utilities over the parents.
    Utility { values: Vec<f64> },
    Expression { expr: CptExpr },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
}

impl NodeSpec {
    pub fn chance(name: impl Into<String>, states: &[&str], parents: &[&str], values: Vec<f64>) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Chance,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            table: Some(TableSpec::Explicit { values }),
        }
    }

    pub fn expression(name: impl Into<String>, states: &[&str], parents: &[&str], expr: CptExpr) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Chance,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            table: Some(TableSpec::Expression { expr }),
        }
    }

    pub fn decision(name: impl Into<String>, states: &[&str]) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Decision,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: Vec::new(),
            table: None,
        }
    }

    pub fn utility(name: impl Into<String>, parents: &[&str], values: Vec<f64>) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Utility,
            states: Vec::new(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            table: Some(TableSpec::Utility { values }),
        }
    }

    pub fn variable(&self) -> Result<Variable> {
        Variable::new(self.name.clone(), self.states.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkDoc {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub decision_order: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub severity: Severity,
    pub node: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn has(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    fn error(&mut self, code: &str, node: Option<&str>, message: impl Into<String>) {
        self.findings.push(Finding {
            code: code.to_string(),
            severity: Severity::Error,
            node: node.map(str::to_string),
            message: message.into(),
        });
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawDoc {
    name: String,
    nodes: Vec<RawNode>,
    #[serde(default)]
    decision_order: Vec<String>,
}

pub(crate) fn syntax_error(e: serde_json::Error) -> CoreError {
    CoreError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub(crate) fn convert_nodes(raw: Vec<RawNode>) -> Result<Vec<NodeSpec>> {
    raw.into_iter()
        .map(|n| {
            let kind = NodeKind::parse(&n.kind).ok_or_else(|| CoreError::UnknownKind {
                node: n.name.clone(),
                kind: n.kind.clone(),
            })?;
            Ok(NodeSpec {
                name: n.name,
                kind,
                states: n.states,
                parents: n.parents,
                table: n.table,
            })
        })
        .collect()
}

/// Node record as it appears on disk, before the kind is checked.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub(crate) struct RawNode {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub table: Option<TableSpec>,
}

impl NetworkDoc {
    pub fn new(name: impl Into<String>, nodes: Vec<NodeSpec>, decision_order: Vec<String>) -> Self {
        NetworkDoc {
            name: name.into(),
            nodes,
            decision_order,
        }
    }

    /// Parses the JSON document format. Rejects syntax errors, unknown node
    /// kinds and parents that name no node.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawDoc = serde_json::from_str(text).map_err(syntax_error)?;
        let nodes = convert_nodes(raw.nodes)?;
        let doc = NetworkDoc {
            name: raw.name,
            nodes,
            decision_order: raw.decision_order,
        };
        let names: HashSet<&str> = doc.nodes.iter().map(|n| n.name.as_str()).collect();
        for n in &doc.nodes {
            for p in &n.parents {
                if !names.contains(p.as_str()) {
                    return Err(CoreError::DanglingParent {
                        node: n.name.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        Ok(doc)
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(self).expect("network documents always serialize")
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_mut(&mut self, name: &str) -> Option<&mut NodeSpec> {
        self.nodes.iter_mut().find(|n| n.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&NodeSpec> {
        self.node(name).ok_or_else(|| CoreError::UnknownNode(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Result<Variable> {
        let n = self.require(name)?;
        if n.kind == NodeKind::Utility {
            return Err(CoreError::Invalid(format!("`{name}` is a utility node")));
        }
        n.variable()
    }

    pub fn names_of(&self, kind: NodeKind) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.name.clone())
            .collect()
    }

    /// Explicit CPT of a chance node, expanding expressions as needed.
    pub fn cpt(&self, name: &str) -> Result<Cpt> {
        let n = self.require(name)?;
        if n.kind != NodeKind::Chance {
            return Err(CoreError::Invalid(format!("`{name}` is not a chance node")));
        }
        let child = n.variable()?;
        let parents = n
            .parents
            .iter()
            .map(|p| self.variable(p))
            .collect::<Result<Vec<_>>>()?;
        match &n.table {
            Some(TableSpec::Explicit { values }) => Cpt::new(child, parents, values.clone()),
            Some(TableSpec::Expression { expr }) => expr.expand(&child, &parents),
            Some(TableSpec::Utility { .. }) | None => Err(CoreError::InvalidNetwork(format!(
                "chance node `{name}` has no probability table"
            ))),
        }
    }

    /// Utility table of a utility node over its parents.
    pub fn utility_table(&self, name: &str) -> Result<Table> {
        let n = self.require(name)?;
        let parents = n
            .parents
            .iter()
            .map(|p| self.variable(p))
            .collect::<Result<Vec<_>>>()?;
        match &n.table {
            Some(TableSpec::Utility { values }) => Table::new(parents, values.clone()),
            _ => Err(CoreError::InvalidNetwork(format!("utility node `{name}` has no utility table"))),
        }
    }

    /// Nodes in a parents-first order, or the first node found on a cycle.
    pub fn topological_order(&self) -> std::result::Result<Vec<String>, String> {
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.as_str(), i))
            .collect();
        let mut indeg = vec![0usize; self.nodes.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for p in &n.parents {
                if let Some(&j) = index.get(p.as_str()) {
                    indeg[i] += 1;
                    children[j].push(i);
                }
            }
        }
        // BTreeSet keeps the order deterministic (by declaration index).
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|i| indeg[*i] == 0).collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop_first() {
            out.push(self.nodes[i].name.clone());
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if out.len() == self.nodes.len() {
            Ok(out)
        } else {
            let stuck = (0..self.nodes.len()).find(|i| indeg[*i] > 0).unwrap();
            Err(self.nodes[stuck].name.clone())
        }
    }

    /// Children of each node by name.
    pub fn children(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> =
            self.nodes.iter().map(|n| (n.name.clone(), Vec::new())).collect();
        for n in &self.nodes {
            for p in &n.parents {
                if let Some(c) = out.get_mut(p) {
                    c.push(n.name.clone());
                }
            }
        }
        out
    }

    /// Checks structure and tables; never fails, problems become findings.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let mut by_name: HashMap<&str, &NodeSpec> = HashMap::new();
        for n in &self.nodes {
            if by_name.insert(n.name.as_str(), n).is_some() {
                rep.error("duplicate-name", Some(&n.name), format!("node `{}` declared twice", n.name));
            }
        }
        for n in &self.nodes {
            let name = Some(n.name.as_str());
            match n.kind {
                NodeKind::Utility => {
                    if !n.states.is_empty() {
                        rep.error("utility-states", name, "utility nodes carry no states");
                    }
                }
                _ => {
                    if let Err(e) = n.variable() {
                        rep.error("states", name, e.to_string());
                    }
                }
            }
            for p in &n.parents {
                match by_name.get(p.as_str()) {
                    None => rep.error("dangling-parent", name, format!("parent `{p}` does not exist")),
                    Some(pn) if pn.kind == NodeKind::Utility => {
                        rep.error("utility-not-leaf", Some(p), format!("utility node `{p}` has child `{}`", n.name))
                    }
                    Some(_) => {}
                }
            }
        }
        if let Err(node) = self.topological_order() {
            rep.error("cycle", Some(&node), format!("directed cycle through `{node}`"));
        }
        if !rep.findings.is_empty() {
            return rep;
        }
        for n in &self.nodes {
            let name = Some(n.name.as_str());
            match n.kind {
                NodeKind::Decision => {
                    if n.table.is_some() {
                        rep.error("decision-table", name, "decision nodes have no table");
                    }
                }
                NodeKind::Utility => match self.utility_table(&n.name) {
                    Ok(_) => {}
                    Err(e) => rep.error("utility-shape", name, e.to_string()),
                },
                NodeKind::Chance => self.check_chance(n, &mut rep),
            }
        }
        let decisions: BTreeSet<&str> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Decision)
            .map(|n| n.name.as_str())
            .collect();
        let ordered: BTreeSet<&str> = self.decision_order.iter().map(String::as_str).collect();
        if ordered != decisions || ordered.len() != self.decision_order.len() {
            rep.error(
                "decision-order",
                None,
                "decisionOrder must list every decision node exactly once",
            );
        }
        rep.ok = !rep.findings.iter().any(|f| f.severity == Severity::Error);
        rep
    }

    fn check_chance(&self, n: &NodeSpec, rep: &mut ValidationReport) {
        let name = Some(n.name.as_str());
        let card = n.states.len();
        let pcard: usize = n
            .parents
            .iter()
            .filter_map(|p| self.node(p))
            .map(|p| p.states.len().max(1))
            .product();
        match &n.table {
            None | Some(TableSpec::Utility { .. }) => {
                rep.error("missing-table", name, "chance node needs a probability table")
            }
            Some(TableSpec::Explicit { values }) => {
                if values.len() != card * pcard {
                    rep.error(
                        "cpt-shape",
                        name,
                        format!("{} entries, expected {}", values.len(), card * pcard),
                    );
                    return;
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    rep.error("cpt-entry", name, "entries must be finite and non-negative");
                    return;
                }
                for (i, row) in values.chunks(card).enumerate() {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > ROW_TOLERANCE {
                        rep.error(
                            "row-normalization",
                            name,
                            format!("row {i} sums to {s}"),
                        );
                        return;
                    }
                }
            }
            Some(TableSpec::Expression { .. }) => {
                if let Err(e) = self.cpt(&n.name) {
                    rep.error("expression", name, e.to_string());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> NetworkDoc {
        NetworkDoc::new(
            "pd",
            vec![
                NodeSpec::chance("Firm1", &["defect", "cooperate"], &[], vec![0.5, 0.5]),
                NodeSpec::decision("Firm2", &["defect", "cooperate"]),
                NodeSpec::utility("U2", &["Firm1", "Firm2"], vec![0.0, -10.0, 150.0, 100.0]),
            ],
            vec!["Firm2".into()],
        )
    }

    #[test]
    fn pd_stage_validates() {
        let r = pd().validate();
        assert!(r.ok, "{:?}", r.findings);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut d = pd();
        d.nodes[0].parents.push("Firm1".into());
        d.nodes[0].table = Some(TableSpec::Explicit {
            values: vec![1.0, 0.0, 0.0, 1.0],
        });
        let r = d.validate();
        assert!(!r.ok);
        assert!(r.has("cycle"));
    }

    #[test]
    fn short_row_is_flagged() {
        let mut d = pd();
        d.nodes[0].table = Some(TableSpec::Explicit {
            values: vec![0.5, 0.4],
        });
        let r = d.validate();
        assert!(r.has("row-normalization"));
        assert!(!r.ok);
    }

    #[test]
    fn utility_with_child_and_bad_order_are_flagged() {
        let mut d = pd();
        d.nodes.push(NodeSpec::chance("X", &["a", "b"], &["U2"], vec![0.5; 2]));
        assert!(d.validate().has("utility-not-leaf"));
        let mut d = pd();
        d.decision_order.clear();
        assert!(d.validate().has("decision-order"));
    }

    #[test]
    fn parse_reports_typo_parent_and_unknown_kind() {
        let mut typo = pd();
        typo.node_mut("U2").unwrap().parents[0] = "Frm1".into();
        let text = typo.serialize();
        match NetworkDoc::parse(&text) {
            Err(CoreError::DanglingParent { parent, .. }) => assert_eq!(parent, "Frm1"),
            other => panic!("unexpected {other:?}"),
        }
        let text = pd().serialize().replace(r#""decision""#, r#""choice""#);
        assert!(matches!(NetworkDoc::parse(&text), Err(CoreError::UnknownKind { .. })));
        match NetworkDoc::parse("{\n  \"name\": \"x\",\n  \"nodes\": [,]\n}") {
            Err(CoreError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let d = pd();
        let back = NetworkDoc::parse(&d.serialize()).unwrap();
        assert_eq!(back, d);
    }
}
