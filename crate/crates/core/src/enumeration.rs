//! Brute-force evaluation over the full joint distribution.
//!
//! Shares no code with the factor operations, so it can serve as an
//! independent reference for the junction tree and the ID solver on small
//! models.

use std::collections::{BTreeMap, HashMap};

use crate::error::{CoreError, Result};
use crate::factor::{Evidence, Variable};
use crate::network::{NetworkDoc, NodeKind, TableSpec};

struct Family {
    child: usize,
    parents: Vec<usize>,
    values: Vec<f64>,
}

struct Payoff {
    parents: Vec<usize>,
    values: Vec<f64>,
}

/// The model as flat lookup tables over integer assignments.
pub struct JointTable {
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
    chance: Vec<usize>,
    families: Vec<Family>,
    payoffs: Vec<Payoff>,
    likelihood: Vec<Option<Vec<f64>>>,
}

fn offset(vars: &[Variable], idx: &[usize], assign: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &v| acc * vars[v].cardinality() + assign[v])
}

impl JointTable {
    pub fn new(doc: &NetworkDoc) -> Result<Self> {
        let mut vars = Vec::new();
        let mut index = HashMap::new();
        for n in doc.nodes.iter().filter(|n| n.kind != NodeKind::Utility) {
            index.insert(n.name.clone(), vars.len());
            vars.push(n.variable()?);
        }
        let idx = |name: &str| index.get(name).copied().ok_or_else(|| CoreError::UnknownNode(name.to_string()));
        let mut chance = Vec::new();
        let mut families = Vec::new();
        let mut payoffs = Vec::new();
        for n in &doc.nodes {
            let parents = n.parents.iter().map(|p| idx(p)).collect::<Result<Vec<_>>>()?;
            match n.kind {
                NodeKind::Chance => {
                    let child = idx(&n.name)?;
                    chance.push(child);
                    let values = doc.cpt(&n.name)?.values().to_vec();
                    families.push(Family { child, parents, values });
                }
                NodeKind::Utility => {
                    let values = match &n.table {
                        Some(TableSpec::Utility { values }) => values.clone(),
                        _ => return Err(CoreError::InvalidNetwork(format!("`{}` has no utility table", n.name))),
                    };
                    payoffs.push(Payoff { parents, values });
                }
                NodeKind::Decision => {}
            }
        }
        let likelihood = vec![None; vars.len()];
        Ok(JointTable {
            vars,
            index,
            chance,
            families,
            payoffs,
            likelihood,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Chance variables, in document order.
    pub fn chance(&self) -> &[usize] {
        &self.chance
    }

    /// Installs evidence as per-state weights.
    pub fn set_evidence(&mut self, evidence: &[Evidence]) -> Result<()> {
        self.likelihood = vec![None; self.vars.len()];
        for e in evidence {
            let i = self.index_of(&e.node).ok_or_else(|| CoreError::UnknownNode(e.node.clone()))?;
            if !self.chance.contains(&i) {
                return Err(CoreError::EvidenceOnDecision(e.node.clone()));
            }
            let w = e.weights(&self.vars[i])?;
            let merged = match self.likelihood[i].take() {
                Some(prev) => prev.iter().zip(&w).map(|(a, b)| a * b).collect(),
                None => w,
            };
            self.likelihood[i] = Some(merged);
        }
        Ok(())
    }

    /// Joint probability of a full assignment times the evidence weights.
    pub fn weight(&self, assign: &[usize]) -> f64 {
        let mut w = 1.0;
        for f in &self.families {
            let row = offset(&self.vars, &f.parents, assign);
            w *= f.values[row * self.vars[f.child].cardinality() + assign[f.child]];
            if w == 0.0 {
                return 0.0;
            }
        }
        for (i, l) in self.likelihood.iter().enumerate() {
            if let Some(l) = l {
                w *= l[assign[i]];
            }
        }
        w
    }

    /// Total utility of a full assignment.
    pub fn utility(&self, assign: &[usize]) -> f64 {
        self.payoffs
            .iter()
            .map(|p| p.values[offset(&self.vars, &p.parents, assign)])
            .sum()
    }

    /// Calls `f` for every assignment of the chance variables (decision
    /// entries left at 0 for the caller to fill in).
    pub fn for_each_chance_assignment(&self, mut f: impl FnMut(&mut Vec<usize>)) {
        let mut assign = vec![0usize; self.vars.len()];
        let total: usize = self.chance.iter().map(|&c| self.vars[c].cardinality()).product();
        for _ in 0..total {
            f(&mut assign);
            for &c in self.chance.iter().rev() {
                assign[c] += 1;
                if assign[c] < self.vars[c].cardinality() {
                    break;
                }
                assign[c] = 0;
            }
        }
    }
}

/// Posterior marginals and `P(e)` of a chance-only network by enumeration.
pub fn joint_marginals(doc: &NetworkDoc, evidence: &[Evidence]) -> Result<(BTreeMap<String, Vec<f64>>, f64)> {
    if let Some(d) = doc.nodes.iter().find(|n| n.kind == NodeKind::Decision) {
        return Err(CoreError::InvalidNetwork(format!("decision node `{}` in a chance query", d.name)));
    }
    let mut jt = JointTable::new(doc)?;
    jt.set_evidence(evidence)?;
    let mut acc: Vec<Vec<f64>> = jt.vars.iter().map(|v| vec![0.0; v.cardinality()]).collect();
    let mut total = 0.0;
    jt.for_each_chance_assignment(|a| {
        let w = jt.weight(a);
        if w > 0.0 {
            total += w;
            for &c in &jt.chance {
                acc[c][a[c]] += w;
            }
        }
    });
    if total <= 0.0 {
        return Err(CoreError::ImpossibleEvidence);
    }
    let out = jt
        .chance
        .iter()
        .map(|&c| {
            (
                jt.vars[c].name().to_string(),
                acc[c].iter().map(|x| x / total).collect(),
            )
        })
        .collect();
    Ok((out, total))
}
