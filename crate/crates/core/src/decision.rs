//! Influence-diagram evaluation.
//!
//! Variable elimination over probability/utility potential pairs in the
//! strong elimination order: chance nodes never observed are summed first,
//! then the last decision is maximised, then the chance nodes observed just
//! before it, and so on back to the first decision.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::enumeration::JointTable;
use crate::error::{CoreError, Result};
use crate::factor::{Evidence, Factor, Table, Variable};
use crate::network::{NetworkDoc, NodeKind, NodeSpec, TableSpec};
use crate::oobn::FlatNetwork;

/// Relative EU gap below which the first decision is reported as a near-tie.
pub const NEAR_TIE_RELATIVE: f64 = 1e-3;

/// Upper bound on the policy space `enumerate_policies` will walk.
pub const POLICY_GUARD: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeEu {
    pub alternative: String,
    pub eu: f64,
}

/// Optimal choice of one decision for every configuration of its domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub decision: String,
    pub alternatives: Vec<String>,
    /// Variables the choice depends on.
    pub domain: Vec<Variable>,
    /// Chosen alternative index per domain configuration (row-major).
    pub choices: Vec<usize>,
}

impl DecisionPolicy {
    pub fn choice(&self, context: &BTreeMap<String, String>) -> Option<&str> {
        let mut off = 0;
        for v in &self.domain {
            let s = v.state_index(context.get(v.name())?)?;
            off = off * v.cardinality() + s;
        }
        Some(self.alternatives[self.choices[off]].as_str())
    }

    /// One rule per domain configuration.
    pub fn rules(&self) -> Vec<(Vec<(String, String)>, String)> {
        let mut out = Vec::with_capacity(self.choices.len());
        let mut counter = vec![0usize; self.domain.len()];
        for &c in &self.choices {
            let cond = self
                .domain
                .iter()
                .zip(&counter)
                .map(|(v, &s)| (v.name().to_string(), v.states()[s].clone()))
                .collect();
            out.push((cond, self.alternatives[c].clone()));
            for pos in (0..counter.len()).rev() {
                counter[pos] += 1;
                if counter[pos] < self.domain[pos].cardinality() {
                    break;
                }
                counter[pos] = 0;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionResult {
    pub meu: f64,
    pub first_decision: Option<String>,
    pub first_decision_eus: Vec<AlternativeEu>,
    pub policies: Vec<DecisionPolicy>,
    pub near_tie: bool,
    pub probability_of_evidence: f64,
}

impl DecisionResult {
    /// Best first alternative (lowest index on exact ties).
    pub fn best_first(&self) -> Option<&AlternativeEu> {
        let mut best: Option<&AlternativeEu> = None;
        for a in &self.first_decision_eus {
            if best.is_none_or(|b| a.eu > b.eu) {
                best = Some(a);
            }
        }
        best
    }

    pub fn eu_of(&self, alternative: &str) -> Option<f64> {
        self.first_decision_eus
            .iter()
            .find(|a| a.alternative == alternative)
            .map(|a| a.eu)
    }

    /// Follows the policies from the first decision while each choice
    /// depends only on earlier decisions.
    pub fn optimal_path(&self) -> Vec<(String, String)> {
        let mut ctx = BTreeMap::new();
        let mut out = Vec::new();
        for p in &self.policies {
            match p.choice(&ctx) {
                Some(c) => {
                    let c = c.to_string();
                    ctx.insert(p.decision.clone(), c.clone());
                    out.push((p.decision.clone(), c));
                }
                None => break,
            }
        }
        out
    }
}

fn is_near_tie(eus: &[AlternativeEu]) -> bool {
    if eus.len() < 2 {
        return false;
    }
    let mut sorted: Vec<f64> = eus.iter().map(|a| a.eu).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite EUs"));
    let scale = eus.iter().map(|a| a.eu.abs()).fold(0.0, f64::max);
    let gap = sorted[0] - sorted[1];
    if scale == 0.0 {
        gap == 0.0
    } else {
        gap / scale < NEAR_TIE_RELATIVE
    }
}

/// A validated influence diagram ready for evaluation.
#[derive(Clone, Debug)]
pub struct DecisionProblem {
    doc: NetworkDoc,
    order: Vec<String>,
    /// Chance nodes known when each decision is taken (cumulative).
    observed: Vec<Vec<String>>,
    findings: Vec<Evidence>,
    weights: BTreeMap<String, f64>,
}

impl DecisionProblem {
    pub fn new(doc: NetworkDoc) -> Result<Self> {
        let report = doc.validate();
        if !report.ok {
            let msg = report
                .findings
                .iter()
                .filter(|f| f.severity == crate::network::Severity::Error)
                .map(|f| format!("{}: {}", f.code, f.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(CoreError::InvalidNetwork(msg));
        }
        let order = if doc.decision_order.is_empty() {
            doc.names_of(NodeKind::Decision)
        } else {
            doc.decision_order.clone()
        };
        let children = doc.children();
        let descendants = |start: &str| -> BTreeSet<String> {
            let mut seen = BTreeSet::new();
            let mut stack = vec![start.to_string()];
            while let Some(x) = stack.pop() {
                for c in children.get(&x).into_iter().flatten() {
                    if seen.insert(c.clone()) {
                        stack.push(c.clone());
                    }
                }
            }
            seen
        };
        let mut observed = Vec::with_capacity(order.len());
        let mut known: Vec<String> = Vec::new();
        for (k, d) in order.iter().enumerate() {
            let node = doc.require(d)?;
            for p in &node.parents {
                let pk = doc.require(p)?.kind;
                match pk {
                    NodeKind::Decision => {
                        if !order[..k].contains(p) {
                            return Err(CoreError::InvalidNetwork(format!(
                                "decision `{d}` observes `{p}`, which is not an earlier decision"
                            )));
                        }
                    }
                    NodeKind::Chance => {
                        if !known.contains(p) {
                            known.push(p.clone());
                        }
                    }
                    NodeKind::Utility => unreachable!("validation rejects utility parents"),
                }
            }
            for later in &order[k..] {
                let desc = descendants(later);
                if let Some(bad) = known.iter().find(|o| desc.contains(*o)) {
                    return Err(CoreError::InvalidNetwork(format!(
                        "`{bad}` is observed before `{d}` but depends on decision `{later}`"
                    )));
                }
            }
            observed.push(known.clone());
        }
        Ok(DecisionProblem {
            doc,
            order,
            observed,
            findings: Vec::new(),
            weights: BTreeMap::new(),
        })
    }

    /// Problem over a flattened network, including its baked findings.
    pub fn from_flat(flat: &FlatNetwork) -> Result<Self> {
        let mut p = Self::new(flat.doc.clone())?;
        p.findings = flat.finding_evidence();
        Ok(p)
    }

    pub fn doc(&self) -> &NetworkDoc {
        &self.doc
    }

    pub fn decision_order(&self) -> &[String] {
        &self.order
    }

    pub fn findings(&self) -> &[Evidence] {
        &self.findings
    }

    pub fn with_findings(mut self, findings: Vec<Evidence>) -> Self {
        self.findings = findings;
        self
    }

    /// Scales the utility node `name` by `weight`.
    pub fn with_utility_weight(mut self, name: &str, weight: f64) -> Result<Self> {
        if self.doc.require(name)?.kind != NodeKind::Utility {
            return Err(CoreError::Invalid(format!("`{name}` is not a utility node")));
        }
        self.weights.insert(name.to_string(), weight);
        Ok(self)
    }

    /// Converts `decision` into a chance node fixed at `alternative`.
    pub fn fix_decision(&self, decision: &str, alternative: &str) -> Result<DecisionProblem> {
        let node = self.doc.require(decision)?;
        if node.kind != NodeKind::Decision {
            return Err(CoreError::Invalid(format!("`{decision}` is not a decision node")));
        }
        let idx = node
            .states
            .iter()
            .position(|s| s == alternative)
            .ok_or_else(|| CoreError::UnknownAlternative {
                decision: decision.to_string(),
                alternative: alternative.to_string(),
            })?;
        let mut values = vec![0.0; node.states.len()];
        values[idx] = 1.0;
        let mut doc = self.doc.clone();
        let n = doc.node_mut(decision).expect("checked above");
        n.kind = NodeKind::Chance;
        n.parents.clear();
        n.table = Some(TableSpec::Explicit { values });
        doc.decision_order.retain(|d| d != decision);
        let mut out = DecisionProblem::new(doc)?;
        out.findings = self.findings.clone();
        out.weights = self.weights.clone();
        Ok(out)
    }

    fn check_evidence(&self, evidence: &[Evidence]) -> Result<Vec<Evidence>> {
        let mut all = self.findings.clone();
        for e in evidence {
            let node = self.doc.require(&e.node)?;
            match node.kind {
                NodeKind::Decision => return Err(CoreError::EvidenceOnDecision(e.node.clone())),
                NodeKind::Utility => {
                    return Err(CoreError::MalformedEvidence {
                        node: e.node.clone(),
                        reason: "utility nodes cannot carry evidence".into(),
                    })
                }
                NodeKind::Chance => {}
            }
            e.weights(&node.variable()?)?;
            all.push(e.clone());
        }
        Ok(all)
    }

    fn weight_of(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(1.0)
    }

    /// Optimal policies and expected utilities under `evidence`.
    pub fn evaluate(&self, evidence: &[Evidence]) -> Result<DecisionResult> {
        let all = self.check_evidence(evidence)?;
        let mut probs: Vec<Factor> = Vec::new();
        let mut utils: Vec<Table> = Vec::new();
        for n in &self.doc.nodes {
            match n.kind {
                NodeKind::Chance => probs.push(self.doc.cpt(&n.name)?.factor().clone()),
                NodeKind::Utility => {
                    let w = self.weight_of(&n.name);
                    utils.push(self.doc.utility_table(&n.name)?.map(|v| v * w));
                }
                NodeKind::Decision => {}
            }
        }
        for e in &all {
            probs.push(e.to_factor(&self.doc.variable(&e.node)?)?);
        }

        let chance: Vec<String> = self.doc.names_of(NodeKind::Chance);
        let n = self.order.len();
        // groups[k] = chance nodes that become known between decision k and k+1
        let mut groups: Vec<Vec<String>> = Vec::with_capacity(n + 1);
        let mut prev: Vec<String> = Vec::new();
        for k in 0..n {
            groups.push(self.observed[k].iter().filter(|c| !prev.contains(c)).cloned().collect());
            prev = self.observed[k].clone();
        }
        groups.push(chance.iter().filter(|c| !prev.contains(c)).cloned().collect());

        let mut policies: Vec<Option<DecisionPolicy>> = vec![None; n];
        let mut first_eus = Vec::new();
        for k in (0..=n).rev() {
            eliminate_chance_group(&groups[k], &mut probs, &mut utils)?;
            if k == 0 {
                break;
            }
            let d = &self.order[k - 1];
            if k == 1 {
                first_eus = first_decision_eus(&self.doc, d, &groups[0], &probs, &utils)?;
            }
            policies[k - 1] = Some(eliminate_decision(&self.doc, d, &mut probs, &mut utils)?);
        }
        let pe: f64 = probs.iter().map(|f| f.sum()).product();
        if pe <= 0.0 {
            return Err(CoreError::ImpossibleEvidence);
        }
        let meu: f64 = utils.iter().map(Table::sum).sum();
        let near_tie = is_near_tie(&first_eus);
        Ok(DecisionResult {
            meu,
            first_decision: self.order.first().cloned(),
            first_decision_eus: first_eus,
            policies: policies.into_iter().map(|p| p.expect("every decision eliminated")).collect(),
            near_tie,
            probability_of_evidence: pe,
        })
    }

    /// Network with every decision replaced by the deterministic chance node
    /// implementing its optimal policy.
    pub fn policy_network(&self, result: &DecisionResult) -> Result<NetworkDoc> {
        let mut doc = self.doc.clone();
        for p in &result.policies {
            let n = doc.node_mut(&p.decision).ok_or_else(|| CoreError::UnknownNode(p.decision.clone()))?;
            let card = p.alternatives.len();
            let mut values = vec![0.0; p.choices.len() * card];
            for (row, &c) in p.choices.iter().enumerate() {
                values[row * card + c] = 1.0;
            }
            n.kind = NodeKind::Chance;
            n.parents = p.domain.iter().map(|v| v.name().to_string()).collect();
            n.table = Some(TableSpec::Explicit { values });
        }
        doc.decision_order.clear();
        doc.nodes.retain(|n: &NodeSpec| n.kind != NodeKind::Utility);
        Ok(doc)
    }

    /// Reference solution by walking every policy over the full joint.
    /// Policies map the configurations of each decision's observed chance
    /// nodes to alternatives.
    pub fn enumerate_policies(&self, evidence: &[Evidence], guard: u128) -> Result<(DecisionResult, u128)> {
        let all = self.check_evidence(evidence)?;
        let mut jt = JointTable::new(&self.doc)?;
        jt.set_evidence(&all)?;
        let vars = jt.variables().to_vec();
        let dec_idx: Vec<usize> = self.order.iter().map(|d| jt.index_of(d).expect("decision in table")).collect();
        let obs_idx: Vec<Vec<usize>> = self
            .observed
            .iter()
            .map(|o| o.iter().map(|c| jt.index_of(c).expect("chance in table")).collect())
            .collect();
        let sizes: Vec<usize> = obs_idx
            .iter()
            .map(|o| o.iter().map(|&v| vars[v].cardinality()).product())
            .collect();
        let mut count: u128 = 1;
        for (k, &d) in dec_idx.iter().enumerate() {
            let per = (vars[d].cardinality() as u128)
                .checked_pow(sizes[k] as u32)
                .ok_or(CoreError::GuardExceeded(u128::MAX))?;
            count = count.checked_mul(per).ok_or(CoreError::GuardExceeded(u128::MAX))?;
            if count > guard {
                return Err(CoreError::GuardExceeded(count));
            }
        }
        let utility_weights: Vec<f64> = self
            .doc
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Utility)
            .map(|n| self.weight_of(&n.name))
            .collect();
        if utility_weights.iter().any(|w| *w != 1.0) {
            return Err(CoreError::Invalid("policy enumeration supports unit utility weights only".into()));
        }

        // flattened policy: for each decision, one choice per observed configuration
        let slots: Vec<(usize, usize)> = dec_idx
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n((k, vars[d].cardinality()), sizes[k]))
            .collect();
        let starts: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let st = *acc;
                *acc += s;
                Some(st)
            })
            .collect();
        let mut policy = vec![0usize; slots.len()];
        let n_alt1 = dec_idx.first().map(|&d| vars[d].cardinality()).unwrap_or(0);
        let mut best_first = vec![f64::NEG_INFINITY; n_alt1];
        let mut best: Option<(f64, Vec<usize>, f64)> = None;
        for _ in 0..count {
            let mut num = 0.0;
            let mut den = 0.0;
            jt.for_each_chance_assignment(|a| {
                for (k, &d) in dec_idx.iter().enumerate() {
                    let off = obs_idx[k].iter().fold(0, |acc, &v| acc * vars[v].cardinality() + a[v]);
                    a[d] = policy[starts[k] + off];
                }
                let w = jt.weight(a);
                if w > 0.0 {
                    den += w;
                    num += w * jt.utility(a);
                }
            });
            if den <= 0.0 {
                return Err(CoreError::ImpossibleEvidence);
            }
            let eu = num / den;
            if best.as_ref().is_none_or(|(b, _, _)| eu > *b) {
                best = Some((eu, policy.clone(), den));
            }
            if n_alt1 > 0 {
                let first = &policy[starts[0]..starts[0] + sizes[0]];
                if first.iter().all(|&c| c == first[0]) && eu > best_first[first[0]] {
                    best_first[first[0]] = eu;
                }
            }
            for pos in (0..slots.len()).rev() {
                policy[pos] += 1;
                if policy[pos] < slots[pos].1 {
                    break;
                }
                policy[pos] = 0;
            }
        }
        let (meu, choices, pe) = match best {
            Some(b) => b,
            None => {
                // no decisions: a single empty policy
                let mut num = 0.0;
                let mut den = 0.0;
                jt.for_each_chance_assignment(|a| {
                    let w = jt.weight(a);
                    den += w;
                    num += w * jt.utility(a);
                });
                if den <= 0.0 {
                    return Err(CoreError::ImpossibleEvidence);
                }
                (num / den, Vec::new(), den)
            }
        };
        let policies = dec_idx
            .iter()
            .enumerate()
            .map(|(k, &d)| DecisionPolicy {
                decision: self.order[k].clone(),
                alternatives: vars[d].states().to_vec(),
                domain: obs_idx[k].iter().map(|&v| vars[v].clone()).collect(),
                choices: choices[starts[k]..starts[k] + sizes[k]].to_vec(),
            })
            .collect();
        let first_eus: Vec<AlternativeEu> = dec_idx
            .first()
            .map(|&d| {
                vars[d]
                    .states()
                    .iter()
                    .zip(&best_first)
                    .map(|(s, &eu)| AlternativeEu {
                        alternative: s.clone(),
                        eu,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let near_tie = is_near_tie(&first_eus);
        Ok((
            DecisionResult {
                meu,
                first_decision: self.order.first().cloned(),
                first_decision_eus: first_eus,
                policies,
                near_tie,
                probability_of_evidence: pe,
            },
            count,
        ))
    }
}

/// Picks the next variable of `group` to eliminate: smallest resulting
/// table, ties by name.
fn next_in_group(group: &[String], probs: &[Factor], utils: &[Table]) -> usize {
    let mut best: Option<(usize, usize)> = None;
    for (i, x) in group.iter().enumerate() {
        let mut scope: BTreeMap<&str, usize> = BTreeMap::new();
        let tables = probs.iter().map(Factor::table).chain(utils.iter());
        for t in tables.filter(|t| t.contains(x)) {
            for v in t.scope() {
                scope.insert(v.name(), v.cardinality());
            }
        }
        let size: usize = scope.values().product();
        let better = match best {
            None => true,
            Some((bs, bi)) => size < bs || (size == bs && group[i] < group[bi]),
        };
        if better {
            best = Some((size, i));
        }
    }
    best.expect("non-empty group").1
}

fn eliminate_chance_group(group: &[String], probs: &mut Vec<Factor>, utils: &mut Vec<Table>) -> Result<()> {
    let mut remaining: Vec<String> = group.to_vec();
    while !remaining.is_empty() {
        let i = next_in_group(&remaining, probs, utils);
        let x = remaining.remove(i);
        eliminate_chance(&x, probs, utils)?;
    }
    Ok(())
}

fn product(factors: Vec<Factor>) -> Result<Factor> {
    let mut it = factors.into_iter();
    let first = it.next().unwrap_or_else(Factor::unit);
    it.try_fold(first, |acc, f| acc.multiply(&f))
}

fn total(tables: Vec<Table>) -> Result<Option<Table>> {
    let mut it = tables.into_iter();
    let Some(first) = it.next() else {
        return Ok(None);
    };
    it.try_fold(first, |acc, t| acc.combine(&t, |a, b| a + b)).map(Some)
}

fn eliminate_chance(x: &str, probs: &mut Vec<Factor>, utils: &mut Vec<Table>) -> Result<()> {
    let (with, rest): (Vec<Factor>, Vec<Factor>) = std::mem::take(probs).into_iter().partition(|f| f.contains(x));
    *probs = rest;
    let (uwith, urest): (Vec<Table>, Vec<Table>) = std::mem::take(utils).into_iter().partition(|t| t.contains(x));
    *utils = urest;
    let phi = product(with)?;
    if !phi.contains(x) {
        // only utilities mention x: it carries no probability mass here
        return Err(CoreError::Invalid(format!("chance node `{x}` has no probability factor")));
    }
    let phi_out = phi.marginalize(&[x])?;
    if let Some(psi) = total(uwith)? {
        let num = phi.table().combine(&psi, |a, b| a * b)?.sum_out(&[x])?;
        let names: Vec<&str> = num.scope().iter().map(Variable::name).collect();
        let den = phi_out.table().combine(&num, |a, _| a)?.permute(&names)?;
        let psi_out = num.combine(&den, |n, d| if d > 0.0 { n / d } else { 0.0 })?;
        utils.push(psi_out);
    }
    probs.push(phi_out);
    Ok(())
}

fn eliminate_decision(doc: &NetworkDoc, d: &str, probs: &mut Vec<Factor>, utils: &mut Vec<Table>) -> Result<DecisionPolicy> {
    let var = doc.variable(d)?;
    let (with, rest): (Vec<Factor>, Vec<Factor>) = std::mem::take(probs).into_iter().partition(|f| f.contains(d));
    *probs = rest;
    let (uwith, urest): (Vec<Table>, Vec<Table>) = std::mem::take(utils).into_iter().partition(|t| t.contains(d));
    *utils = urest;
    let (domain, choices, indicator) = match total(uwith)? {
        Some(psi) => {
            let (psi_out, arg) = psi.max_out(d)?;
            let domain = psi_out.scope().to_vec();
            let choices = arg.clone();
            // indicator over domain ++ [d] selecting the maximising alternative
            let card = var.cardinality();
            let mut ind = Vec::with_capacity(arg.len() * card);
            for &a in &arg {
                for s in 0..card {
                    ind.push(if s == a { 1.0 } else { 0.0 });
                }
            }
            let mut scope = domain.clone();
            scope.push(var.clone());
            utils.push(psi_out);
            (domain, choices, Factor::new(scope, ind)?)
        }
        None => {
            let mut ind = vec![0.0; var.cardinality()];
            ind[0] = 1.0;
            (Vec::new(), vec![0], Factor::new(vec![var.clone()], ind)?)
        }
    };
    if !with.is_empty() {
        let phi = product(with)?.multiply(&indicator)?;
        probs.push(phi.marginalize(&[d])?);
    }
    Ok(DecisionPolicy {
        decision: d.to_string(),
        alternatives: var.states().to_vec(),
        domain,
        choices,
    })
}

fn first_decision_eus(
    doc: &NetworkDoc,
    d: &str,
    group0: &[String],
    probs: &[Factor],
    utils: &[Table],
) -> Result<Vec<AlternativeEu>> {
    let mut probs = probs.to_vec();
    let mut utils = utils.to_vec();
    eliminate_chance_group(group0, &mut probs, &mut utils)?;
    let var = doc.variable(d)?;
    let mut eus = vec![0.0; var.cardinality()];
    for t in &utils {
        for (s, eu) in eus.iter_mut().enumerate() {
            *eu += if t.contains(d) { t.slice(d, s)?.sum() } else { t.sum() };
        }
    }
    Ok(var
        .states()
        .iter()
        .zip(eus)
        .map(|(s, eu)| AlternativeEu {
            alternative: s.clone(),
            eu,
        })
        .collect())
}
