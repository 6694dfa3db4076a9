//! Exact inference on chance networks by junction-tree message passing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::factor::{Cpt, Evidence, Factor, Variable};
use crate::network::{NetworkDoc, NodeKind};

/// A compiled chance-only network.
#[derive(Clone, Debug)]
pub struct BayesNet {
    name: String,
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    /// Compiles the chance part of `doc`. Utility nodes are ignored; decision
    /// nodes must have been replaced by chance nodes beforehand.
    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
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
        if let Some(d) = doc.nodes.iter().find(|n| n.kind == NodeKind::Decision) {
            return Err(CoreError::InvalidNetwork(format!(
                "decision node `{}` must be fixed before chance inference",
                d.name
            )));
        }
        let mut vars = Vec::new();
        let mut cpts = Vec::new();
        for n in doc.nodes.iter().filter(|n| n.kind == NodeKind::Chance) {
            vars.push(n.variable()?);
            cpts.push(doc.cpt(&n.name)?);
        }
        Ok(Self::assemble(doc.name.clone(), vars, cpts))
    }

    /// Builds directly from CPTs; every parent must be some CPT's child.
    pub fn from_cpts(name: impl Into<String>, cpts: Vec<Cpt>) -> Result<Self> {
        let vars: Vec<Variable> = cpts.iter().map(|c| c.child().clone()).collect();
        let net = Self::assemble(name.into(), vars, cpts);
        if net.index.len() != net.vars.len() {
            return Err(CoreError::Invalid("duplicate child in CPT list".into()));
        }
        for c in &net.cpts {
            for p in c.parents() {
                match net.index.get(p.name()) {
                    Some(&i) if net.vars[i] == *p => {}
                    Some(_) => return Err(CoreError::StateMismatch(p.name().to_string())),
                    None => {
                        return Err(CoreError::DanglingParent {
                            node: c.child().name().to_string(),
                            parent: p.name().to_string(),
                        })
                    }
                }
            }
        }
        Ok(net)
    }

    fn assemble(name: String, vars: Vec<Variable>, cpts: Vec<Cpt>) -> Self {
        let index = vars.iter().enumerate().map(|(i, v)| (v.name().to_string(), i)).collect();
        BayesNet {
            name,
            vars,
            index,
            cpts,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.index_of(name)
            .map(|i| &self.vars[i])
            .ok_or_else(|| CoreError::UnknownNode(name.to_string()))
    }

    pub fn cpt(&self, name: &str) -> Result<&Cpt> {
        self.index_of(name)
            .map(|i| &self.cpts[i])
            .ok_or_else(|| CoreError::UnknownNode(name.to_string()))
    }

    /// Copy of the network with one CPT replaced (same child and parents).
    pub fn with_cpt(&self, cpt: Cpt) -> Result<BayesNet> {
        let i = self
            .index_of(cpt.child().name())
            .ok_or_else(|| CoreError::UnknownNode(cpt.child().name().to_string()))?;
        if cpt.parents() != self.cpts[i].parents() {
            return Err(CoreError::Invalid(format!(
                "replacement CPT for `{}` changes the parent set",
                cpt.child().name()
            )));
        }
        let mut out = self.clone();
        out.cpts[i] = cpt;
        Ok(out)
    }

    fn moral_graph(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.vars.len()];
        for (c, cpt) in self.cpts.iter().enumerate() {
            let mut fam: Vec<usize> = cpt.parents().iter().map(|p| self.index[p.name()]).collect();
            fam.push(c);
            for &a in &fam {
                for &b in &fam {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        adj
    }
}

/// How the moral graph is triangulated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Elimination {
    /// Greedy minimum fill-in, ties broken by variable name.
    MinFill,
    /// A caller-supplied order over all variables.
    Fixed(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clique {
    /// Variable indices of the network, ascending.
    pub vars: Vec<usize>,
    /// CPTs assigned to this clique.
    pub cpts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct JunctionTree {
    cliques: Vec<Clique>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    elimination_order: Vec<String>,
    base: Vec<Factor>,
}

impl JunctionTree {
    pub fn build(net: &BayesNet, elimination: &Elimination) -> Result<Self> {
        let n = net.vars.len();
        let mut adj = net.moral_graph();
        let order: Vec<usize> = match elimination {
            Elimination::Fixed(names) => {
                let idx = names
                    .iter()
                    .map(|s| net.index_of(s).ok_or_else(|| CoreError::UnknownNode(s.clone())))
                    .collect::<Result<Vec<_>>>()?;
                let set: BTreeSet<usize> = idx.iter().copied().collect();
                if set.len() != n || idx.len() != n {
                    return Err(CoreError::Invalid("elimination order must list every variable once".into()));
                }
                idx
            }
            Elimination::MinFill => Vec::new(),
        };
        let mut eliminated = vec![false; n];
        let mut raw_cliques: Vec<BTreeSet<usize>> = Vec::new();
        let mut chosen = Vec::with_capacity(n);
        for step in 0..n {
            let v = if let Elimination::Fixed(_) = elimination {
                order[step]
            } else {
                let mut best: Option<(usize, usize)> = None;
                for v in (0..n).filter(|v| !eliminated[*v]) {
                    let nb: Vec<usize> = adj[v].iter().copied().collect();
                    let mut fill = 0;
                    for i in 0..nb.len() {
                        for j in i + 1..nb.len() {
                            if !adj[nb[i]].contains(&nb[j]) {
                                fill += 1;
                            }
                        }
                    }
                    let better = match best {
                        None => true,
                        Some((bf, bv)) => fill < bf || (fill == bf && net.vars[v].name() < net.vars[bv].name()),
                    };
                    if better {
                        best = Some((fill, v));
                    }
                }
                best.expect("variables remain").1
            };
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    adj[nb[i]].insert(nb[j]);
                    adj[nb[j]].insert(nb[i]);
                }
            }
            let mut clique: BTreeSet<usize> = nb.iter().copied().collect();
            clique.insert(v);
            for &u in &nb {
                adj[u].remove(&v);
            }
            adj[v].clear();
            eliminated[v] = true;
            chosen.push(v);
            if !raw_cliques.iter().any(|c| clique.is_subset(c)) {
                raw_cliques.retain(|c| !c.is_subset(&clique));
                raw_cliques.push(clique);
            }
        }
        if raw_cliques.is_empty() {
            raw_cliques.push(BTreeSet::new());
        }

        // maximum spanning tree on separator size; empty separators join components
        let k = raw_cliques.len();
        let mut candidates = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let w = raw_cliques[i].intersection(&raw_cliques[j]).count();
                candidates.push((w, i, j));
            }
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        let mut edges = Vec::new();
        for (_, i, j) in candidates {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
                edges.push((i, j));
            }
        }
        let mut neighbours = vec![Vec::new(); k];
        for &(i, j) in &edges {
            neighbours[i].push(j);
            neighbours[j].push(i);
        }

        let mut cliques: Vec<Clique> = raw_cliques
            .into_iter()
            .map(|c| Clique {
                vars: c.into_iter().collect(),
                cpts: Vec::new(),
            })
            .collect();
        for (c, cpt) in net.cpts.iter().enumerate() {
            let mut fam: Vec<usize> = cpt.parents().iter().map(|p| net.index[p.name()]).collect();
            fam.push(c);
            let home = cliques
                .iter()
                .position(|cl| fam.iter().all(|v| cl.vars.binary_search(v).is_ok()))
                .ok_or_else(|| CoreError::Invalid(format!("no clique covers the family of `{}`", net.vars[c].name())))?;
            cliques[home].cpts.push(c);
        }
        let base = cliques
            .iter()
            .map(|cl| {
                let scope: Vec<Variable> = cl.vars.iter().map(|&v| net.vars[v].clone()).collect();
                let ones = vec![1.0; scope.iter().map(Variable::cardinality).product()];
                let mut f = Factor::new(scope, ones)?;
                for &c in &cl.cpts {
                    f = f.multiply(net.cpts[c].factor())?;
                }
                let names: Vec<&str> = cl.vars.iter().map(|&v| net.vars[v].name()).collect();
                f.permute(&names)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JunctionTree {
            cliques,
            edges,
            neighbours,
            elimination_order: chosen.iter().map(|&v| net.vars[v].name().to_string()).collect(),
            base,
        })
    }

    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn elimination_order(&self) -> &[String] {
        &self.elimination_order
    }

    pub fn separator(&self, a: usize, b: usize) -> Vec<usize> {
        self.cliques[a]
            .vars
            .iter()
            .copied()
            .filter(|v| self.cliques[b].vars.binary_search(v).is_ok())
            .collect()
    }

    /// Largest clique state space.
    pub fn max_clique_size(&self) -> usize {
        self.base.iter().map(|f| f.values().len()).max().unwrap_or(0)
    }

    /// Every variable shared by two cliques lies in every clique on the path
    /// between them.
    pub fn has_running_intersection(&self) -> bool {
        let k = self.cliques.len();
        for a in 0..k {
            // BFS recording the tree path from `a`
            let mut prev = vec![usize::MAX; k];
            prev[a] = a;
            let mut queue = std::collections::VecDeque::from([a]);
            while let Some(x) = queue.pop_front() {
                for &y in &self.neighbours[x] {
                    if prev[y] == usize::MAX {
                        prev[y] = x;
                        queue.push_back(y);
                    }
                }
            }
            for b in a + 1..k {
                let shared = self.separator(a, b);
                let mut x = b;
                while x != a {
                    if shared.iter().any(|v| self.cliques[x].vars.binary_search(v).is_err()) {
                        return false;
                    }
                    x = prev[x];
                }
            }
        }
        true
    }

    fn bfs_order(&self) -> (Vec<usize>, Vec<usize>) {
        let k = self.cliques.len();
        let mut parent = vec![usize::MAX; k];
        let mut order = Vec::with_capacity(k);
        parent[0] = 0;
        order.push(0);
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            for &y in &self.neighbours[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    order.push(y);
                }
            }
            i += 1;
        }
        (order, parent)
    }

    /// Two-pass message passing under `evidence`.
    pub fn calibrate(&self, net: &BayesNet, evidence: &[Evidence]) -> Result<Calibration> {
        let mut potentials = self.base.clone();
        for e in evidence {
            let v = net
                .index_of(&e.node)
                .ok_or_else(|| CoreError::UnknownNode(e.node.clone()))?;
            let home = self
                .cliques
                .iter()
                .position(|c| c.vars.binary_search(&v).is_ok())
                .expect("every variable lies in some clique");
            potentials[home] = potentials[home].reduce(e)?;
        }
        let (order, parent) = self.bfs_order();
        let k = self.cliques.len();
        let mut log_pe = 0.0;
        // messages[(from, to)]
        let mut messages: HashMap<(usize, usize), Factor> = HashMap::new();
        let sep_names = |a: usize, b: usize| -> Vec<&str> {
            self.separator(a, b).into_iter().map(|v| net.vars[v].name()).collect()
        };
        let product_except = |x: usize, skip: usize, msgs: &HashMap<(usize, usize), Factor>| -> Result<Factor> {
            let mut f = potentials[x].clone();
            for &y in &self.neighbours[x] {
                if y != skip {
                    f = f.multiply(&msgs[&(y, x)])?;
                }
            }
            Ok(f)
        };
        for &x in order.iter().skip(1).rev() {
            let p = parent[x];
            let m = product_except(x, p, &messages)?.project(&sep_names(x, p))?;
            let (m, z) = m.normalize()?;
            log_pe += z.ln();
            messages.insert((x, p), m);
        }
        for &x in &order {
            for &y in &self.neighbours[x] {
                if parent[y] == x && y != x {
                    let m = product_except(x, y, &messages)?.project(&sep_names(x, y))?;
                    let (m, _) = m.normalize()?;
                    messages.insert((x, y), m);
                }
            }
        }
        let mut beliefs = Vec::with_capacity(k);
        for x in 0..k {
            let b = product_except(x, usize::MAX, &messages)?;
            let names: Vec<&str> = self.cliques[x].vars.iter().map(|&v| net.vars[v].name()).collect();
            let (b, z) = b.permute(&names)?.normalize()?;
            if x == 0 {
                log_pe += z.ln();
            }
            beliefs.push(b);
        }
        Ok(Calibration { beliefs, log_pe })
    }
}

/// Normalised clique beliefs after message passing.
#[derive(Clone, Debug)]
pub struct Calibration {
    beliefs: Vec<Factor>,
    log_pe: f64,
}

impl Calibration {
    pub fn beliefs(&self) -> &[Factor] {
        &self.beliefs
    }

    pub fn log_probability_of_evidence(&self) -> f64 {
        self.log_pe
    }

    pub fn probability_of_evidence(&self) -> f64 {
        self.log_pe.exp()
    }

    /// Largest absolute disagreement between neighbouring cliques on their
    /// separator marginals.
    pub fn separator_discrepancy(&self, tree: &JunctionTree, net: &BayesNet) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(a, b) in tree.edges() {
            let names: Vec<&str> = tree.separator(a, b).into_iter().map(|v| net.vars[v].name()).collect();
            let ma = self.beliefs[a].project(&names)?.permute(&names)?;
            let mb = self.beliefs[b].project(&names)?.permute(&names)?;
            for (x, y) in ma.values().iter().zip(mb.values()) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }
}

/// Posterior queries against a compiled network with mutable evidence.
#[derive(Clone, Debug)]
pub struct InferenceSession {
    net: Arc<BayesNet>,
    tree: Arc<JunctionTree>,
    evidence: BTreeMap<String, Evidence>,
    cache: Option<std::result::Result<Calibration, CoreError>>,
}

impl InferenceSession {
    pub fn new(net: BayesNet) -> Result<Self> {
        let tree = JunctionTree::build(&net, &Elimination::MinFill)?;
        Ok(Self::with_tree(Arc::new(net), Arc::new(tree)))
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        Self::new(BayesNet::from_doc(doc)?)
    }

    /// Shares an already compiled network and tree.
    pub fn with_tree(net: Arc<BayesNet>, tree: Arc<JunctionTree>) -> Self {
        InferenceSession {
            net,
            tree,
            evidence: BTreeMap::new(),
            cache: None,
        }
    }

    pub fn network(&self) -> &BayesNet {
        &self.net
    }

    pub fn tree(&self) -> &JunctionTree {
        &self.tree
    }

    pub fn evidence(&self) -> Vec<Evidence> {
        self.evidence.values().cloned().collect()
    }

    /// Adds or replaces the finding on `e.node`.
    pub fn set_evidence(&mut self, e: Evidence) -> Result<()> {
        let var = self.net.variable(&e.node)?;
        e.weights(var)?;
        self.evidence.insert(e.node.clone(), e);
        self.cache = None;
        Ok(())
    }

    /// Sets a hard finding by state label.
    pub fn observe(&mut self, node: &str, state: &str) -> Result<()> {
        let e = Evidence::state(self.net.variable(node)?, state)?;
        self.set_evidence(e)
    }

    pub fn retract_evidence(&mut self, node: &str) -> bool {
        let removed = self.evidence.remove(node).is_some();
        if removed {
            self.cache = None;
        }
        removed
    }

    pub fn clear_evidence(&mut self) {
        self.evidence.clear();
        self.cache = None;
    }

    pub fn calibrate(&mut self) -> Result<&Calibration> {
        if self.cache.is_none() {
            let ev: Vec<Evidence> = self.evidence.values().cloned().collect();
            self.cache = Some(self.tree.calibrate(&self.net, &ev));
        }
        match self.cache.as_ref().expect("just filled") {
            Ok(c) => Ok(c),
            Err(e) => Err(e.clone()),
        }
    }

    /// `P(e)`; zero when the evidence is impossible.
    pub fn probability_of_evidence(&mut self) -> Result<f64> {
        match self.calibrate() {
            Ok(c) => Ok(c.probability_of_evidence()),
            Err(CoreError::ImpossibleEvidence) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    pub fn log_probability_of_evidence(&mut self) -> Result<f64> {
        match self.calibrate() {
            Ok(c) => Ok(c.log_probability_of_evidence()),
            Err(CoreError::ImpossibleEvidence) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn home_clique(&self, vars: &[usize]) -> Option<usize> {
        self.tree
            .cliques
            .iter()
            .position(|c| vars.iter().all(|v| c.vars.binary_search(v).is_ok()))
    }

    /// Posterior of a single node.
    pub fn marginal(&mut self, node: &str) -> Result<Vec<f64>> {
        let v = self
            .net
            .index_of(node)
            .ok_or_else(|| CoreError::UnknownNode(node.to_string()))?;
        let home = self.home_clique(&[v]).expect("every variable lies in some clique");
        let cal = self.calibrate()?;
        Ok(cal.beliefs[home].project(&[node])?.values().to_vec())
    }

    /// Posteriors of `targets` (every chance node when empty).
    pub fn posterior_marginals(&mut self, targets: &[&str]) -> Result<BTreeMap<String, Vec<f64>>> {
        let names: Vec<String> = if targets.is_empty() {
            self.net.vars.iter().map(|v| v.name().to_string()).collect()
        } else {
            targets.iter().map(|s| s.to_string()).collect()
        };
        for n in &names {
            self.net.variable(n)?;
        }
        self.calibrate()?;
        let mut out = BTreeMap::new();
        for n in names {
            let m = self.marginal(&n)?;
            out.insert(n, m);
        }
        Ok(out)
    }

    /// Posterior over a node's family, laid out as `parents ++ [child]`.
    pub fn family_marginal(&mut self, node: &str) -> Result<Factor> {
        let cpt = self.net.cpt(node)?.clone();
        let mut names: Vec<&str> = cpt.parents().iter().map(Variable::name).collect();
        names.push(cpt.child().name());
        let vars: Vec<usize> = names.iter().map(|n| self.net.index[*n]).collect();
        let home = self.home_clique(&vars).expect("families lie in their home clique");
        let cal = self.calibrate()?;
        cal.beliefs[home].project(&names)?.permute(&names)
    }
}
