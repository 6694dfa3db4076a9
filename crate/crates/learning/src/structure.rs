//! Constraint-based structure learning: PC-stable skeleton search under
//! logical edge constraints, followed by deterministic orientation.

use std::collections::{BTreeMap, BTreeSet};

use mdss_core::{NetworkDoc, NodeSpec, TableSpec};
use serde::{Deserialize, Serialize};

use crate::citest::{chi_square_ci_test_limited, MAX_CONDITIONING};
use crate::dataset::CaseDataset;
use crate::error::{LearningError, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstraintSet {
    #[serde(default)]
    pub required: Vec<(String, String)>,
    #[serde(default)]
    pub forbidden: Vec<(String, String)>,
    /// Edges may only point from an earlier tier to the same or a later one.
    #[serde(default)]
    pub tiers: Vec<Vec<String>>,
    #[serde(default = "within_tier_default")]
    pub within_tier_free: bool,
}

fn within_tier_default() -> bool {
    true
}

impl ConstraintSet {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn tier_of(&self, v: &str) -> Option<usize> {
        self.tiers.iter().position(|t| t.iter().any(|x| x == v))
    }

    pub fn is_required(&self, from: &str, to: &str) -> bool {
        self.required.iter().any(|(a, b)| a == from && b == to)
    }

    /// Whether a directed edge `from -> to` is admissible.
    pub fn allows(&self, from: &str, to: &str) -> bool {
        if self.forbidden.iter().any(|(a, b)| a == from && b == to) {
            return false;
        }
        match (self.tier_of(from), self.tier_of(to)) {
            (Some(a), Some(b)) if a > b => false,
            (Some(a), Some(b)) if a == b => self.within_tier_free || self.is_required(from, to),
            _ => true,
        }
    }

    pub fn check(&self, variables: &[String]) -> Result<()> {
        let known = |v: &str| variables.iter().any(|x| x == v);
        let named = self
            .required
            .iter()
            .chain(&self.forbidden)
            .flat_map(|(a, b)| [a, b])
            .chain(self.tiers.iter().flatten());
        for v in named {
            if !known(v) {
                return Err(LearningError::UnknownVariable(v.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for v in self.tiers.iter().flatten() {
            if !seen.insert(v) {
                return Err(LearningError::ConstraintContradiction(format!("`{v}` appears in two tiers")));
            }
        }
        for (a, b) in &self.required {
            if self.forbidden.iter().any(|(x, y)| x == a && y == b) {
                return Err(LearningError::ConstraintContradiction(format!(
                    "edge {a} -> {b} is both required and forbidden"
                )));
            }
            if !self.allows(a, b) {
                return Err(LearningError::ConstraintContradiction(format!(
                    "required edge {a} -> {b} runs against the tier order"
                )));
            }
            if self.is_required(b, a) {
                return Err(LearningError::ConstraintContradiction(format!(
                    "edges {a} -> {b} and {b} -> {a} are both required"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMark {
    /// Direction implied by constraints, v-structures or propagation.
    Compelled,
    /// Direction chosen by the tier/lexicographic tie-break.
    Reversible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdagEdge {
    pub from: String,
    pub to: String,
    pub mark: EdgeMark,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdag {
    pub variables: Vec<String>,
    pub edges: Vec<PdagEdge>,
    /// Separating set found for each removed pair.
    #[serde(default)]
    pub sepsets: BTreeMap<String, Vec<String>>,
}

impl Pdag {
    pub fn parents_of(&self, v: &str) -> Vec<String> {
        let mut p: Vec<String> = self.edges.iter().filter(|e| e.to == v).map(|e| e.from.clone()).collect();
        p.sort_by_key(|x| self.variables.iter().position(|v| v == x));
        p
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Undirected skeleton as sorted pairs.
    pub fn skeleton(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| {
                if e.from < e.to {
                    (e.from.clone(), e.to.clone())
                } else {
                    (e.to.clone(), e.from.clone())
                }
            })
            .collect()
    }

    pub fn satisfies(&self, c: &ConstraintSet) -> bool {
        c.required.iter().all(|(a, b)| self.has_edge(a, b)) && self.edges.iter().all(|e| c.allows(&e.from, &e.to))
    }

    /// Chance-only network over the learned DAG, states taken from `data`,
    /// with uniform tables. Nodes are listed parents first.
    pub fn to_structure(&self, name: &str, data: &CaseDataset) -> Result<NetworkDoc> {
        let mut nodes = Vec::new();
        for v in &self.variables {
            let var = data.variable(v)?;
            let parents = self.parents_of(v);
            let configs: usize = parents
                .iter()
                .map(|p| data.variable(p).map(|x| x.cardinality()))
                .product::<Result<usize>>()?;
            let k = var.cardinality();
            nodes.push(NodeSpec {
                name: v.clone(),
                kind: mdss_core::NodeKind::Chance,
                states: var.states().to_vec(),
                parents,
                table: Some(TableSpec::Explicit {
                    values: vec![1.0 / k as f64; configs * k],
                }),
            });
        }
        let mut doc = NetworkDoc::new(name, nodes, vec![]);
        let order = doc
            .topological_order()
            .map_err(|v| LearningError::Invalid(format!("learned graph has a cycle through `{v}`")))?;
        doc.nodes.sort_by_key(|n| order.iter().position(|o| o == &n.name));
        Ok(doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LearnConfig {
    pub alpha: f64,
    pub max_conditioning: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            alpha: 0.05,
            max_conditioning: MAX_CONDITIONING,
        }
    }
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Mixed graph used during orientation: `dir[a][b]` means a -> b,
/// `und` holds undirected pairs.
struct Graph {
    n: usize,
    dir: Vec<Vec<bool>>,
    und: Vec<Vec<bool>>,
    mark: Vec<Vec<Option<EdgeMark>>>,
}

impl Graph {
    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.und[a][b] || self.dir[a][b] || self.dir[b][a]
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            for y in 0..self.n {
                if self.dir[x][y] && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        false
    }

    fn orient(&mut self, a: usize, b: usize, mark: EdgeMark) {
        self.und[a][b] = false;
        self.und[b][a] = false;
        self.dir[a][b] = true;
        self.mark[a][b] = Some(mark);
    }

    /// Orients `a - b` as `a -> b` when admissible and acyclic.
    fn try_orient(&mut self, a: usize, b: usize, mark: EdgeMark, ok: &dyn Fn(usize, usize) -> bool) -> bool {
        if self.und[a][b] && ok(a, b) && !self.reaches(b, a) {
            self.orient(a, b, mark);
            true
        } else {
            false
        }
    }

    fn meek(&mut self, mark: EdgeMark, ok: &dyn Fn(usize, usize) -> bool) {
        loop {
            let mut changed = false;
            for a in 0..self.n {
                for b in 0..self.n {
                    if !self.und[a][b] {
                        continue;
                    }
                    // R1: c -> a - b, c and b non-adjacent
                    let r1 = (0..self.n).any(|c| self.dir[c][a] && !self.adjacent(c, b));
                    // R2: a -> c -> b
                    let r2 = (0..self.n).any(|c| self.dir[a][c] && self.dir[c][b]);
                    // R3: a - c -> b, a - d -> b, c and d non-adjacent
                    let r3 = (0..self.n).any(|c| {
                        self.und[a][c]
                            && self.dir[c][b]
                            && (0..self.n).any(|d| d != c && self.und[a][d] && self.dir[d][b] && !self.adjacent(c, d))
                    });
                    if (r1 || r2 || r3) && self.try_orient(a, b, mark, ok) {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
}

fn pair_key(a: &str, b: &str) -> String {
    if a < b {
        format!("{a}|{b}")
    } else {
        format!("{b}|{a}")
    }
}

/// PC-stable search over all columns of `data`.
pub fn learn_structure(data: &CaseDataset, constraints: &ConstraintSet, cfg: &LearnConfig) -> Result<Pdag> {
    let names: Vec<String> = data.schema().iter().map(|v| v.name().to_string()).collect();
    let n = names.len();
    if n < 2 {
        return Err(LearningError::Invalid("structure learning needs at least two variables".into()));
    }
    constraints.check(&names)?;
    let allows = |a: usize, b: usize| constraints.allows(&names[a], &names[b]);
    let required = |a: usize, b: usize| constraints.is_required(&names[a], &names[b]) || constraints.is_required(&names[b], &names[a]);

    let mut adj = vec![vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            adj[a][b] = a != b && (allows(a, b) || allows(b, a));
        }
    }
    let mut sepsets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for level in 0..=cfg.max_conditioning {
        let snapshot = adj.clone();
        let mut any_candidate = false;
        for a in 0..n {
            for b in a + 1..n {
                if !adj[a][b] || required(a, b) {
                    continue;
                }
                let mut removed = false;
                for (x, y) in [(a, b), (b, a)] {
                    let pool: Vec<usize> = (0..n).filter(|&c| c != y && snapshot[x][c]).collect();
                    if pool.len() < level {
                        continue;
                    }
                    any_candidate = true;
                    for s in subsets(&pool, level) {
                        let given: Vec<&str> = s.iter().map(|&c| names[c].as_str()).collect();
                        match chi_square_ci_test_limited(data, &names[a], &names[b], &given, cfg.max_conditioning) {
                            Ok(r) if r.p_value > cfg.alpha => {
                                adj[a][b] = false;
                                adj[b][a] = false;
                                sepsets.insert((a, b), s);
                                removed = true;
                                break;
                            }
                            Ok(_) | Err(LearningError::InsufficientData { .. }) => {}
                            Err(e) => return Err(e),
                        }
                    }
                    if removed {
                        break;
                    }
                }
            }
        }
        if !any_candidate {
            break;
        }
    }

    let mut g = Graph {
        n,
        dir: vec![vec![false; n]; n],
        und: adj.clone(),
        mark: vec![vec![None; n]; n],
    };
    // constraints first
    for a in 0..n {
        for b in 0..n {
            if g.und[a][b] && (constraints.is_required(&names[a], &names[b]) || (allows(a, b) && !allows(b, a))) {
                g.orient(a, b, EdgeMark::Compelled);
            }
        }
    }
    // v-structures a -> c <- b
    for c in 0..n {
        for a in 0..n {
            for b in a + 1..n {
                if a == c || b == c || g.adjacent(a, b) {
                    continue;
                }
                if !(g.adjacent(a, c) && g.adjacent(b, c)) {
                    continue;
                }
                let sep = sepsets.get(&(a, b)).cloned().unwrap_or_default();
                if sep.contains(&c) {
                    continue;
                }
                let fits = |x: usize| g.dir[x][c] || (g.und[x][c] && allows(x, c));
                if fits(a) && fits(b) && !g.dir[c][a] && !g.dir[c][b] {
                    for x in [a, b] {
                        if g.und[x][c] && !g.reaches(c, x) {
                            g.orient(x, c, EdgeMark::Compelled);
                        }
                    }
                }
            }
        }
    }
    g.meek(EdgeMark::Compelled, &allows);
    // remaining edges: tier order, then names
    loop {
        let mut pending: Vec<(usize, usize)> = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if g.und[a][b] {
                    pending.push((a, b));
                }
            }
        }
        if pending.is_empty() {
            break;
        }
        let key = |&(a, b): &(usize, usize)| {
            let ta = constraints.tier_of(&names[a]).unwrap_or(usize::MAX);
            let tb = constraints.tier_of(&names[b]).unwrap_or(usize::MAX);
            (ta.min(tb), names[a].clone().min(names[b].clone()), names[a].clone().max(names[b].clone()))
        };
        pending.sort_by_key(key);
        let (a, b) = pending[0];
        let ta = constraints.tier_of(&names[a]);
        let tb = constraints.tier_of(&names[b]);
        let (first, second) = match (ta, tb) {
            (Some(x), Some(y)) if x != y => {
                if x < y {
                    (a, b)
                } else {
                    (b, a)
                }
            }
            _ => {
                if names[a] <= names[b] {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        };
        if !g.try_orient(first, second, EdgeMark::Reversible, &allows) && !g.try_orient(second, first, EdgeMark::Reversible, &allows) {
            // neither direction admissible without a cycle: drop the edge
            g.und[a][b] = false;
            g.und[b][a] = false;
        }
        g.meek(EdgeMark::Reversible, &allows);
    }

    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if g.dir[a][b] {
                edges.push(PdagEdge {
                    from: names[a].clone(),
                    to: names[b].clone(),
                    mark: g.mark[a][b].unwrap_or(EdgeMark::Reversible),
                });
            }
        }
    }
    let pdag = Pdag {
        variables: names.clone(),
        edges,
        sepsets: sepsets
            .into_iter()
            .map(|((a, b), s)| (pair_key(&names[a], &names[b]), s.into_iter().map(|c| names[c].clone()).collect()))
            .collect(),
    };
    debug_assert!(pdag.satisfies(constraints));
    Ok(pdag)
}
