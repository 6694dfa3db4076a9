//! EM parameter fitting with Dirichlet pseudo-counts.
//!
//! Each M-step is `(expected counts + pseudo-count) / row total`, the MAP
//! estimate under a symmetric Dirichlet prior. The monitored objective is
//! the log posterior `loglik + pseudo_count * sum(log theta)`, which EM
//! never decreases; the plain log-likelihood is traced alongside it.

use std::collections::HashMap;

use mdss_core::{BayesNet, Cpt, Evidence, InferenceSession, NetworkDoc, NodeKind, NodeSpec, TableSpec, Variable};
use serde::{Deserialize, Serialize};

use crate::dataset::CaseDataset;
use crate::error::{LearningError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmConfig {
    pub pseudo_count: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            pseudo_count: 1.0,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    /// The structure with every chance table replaced by its fitted CPT.
    pub network: NetworkDoc,
    /// Log posterior at the start of each iteration.
    pub trace: Vec<f64>,
    /// Data log-likelihood at the start of each iteration.
    pub loglik: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
}

struct Family {
    child: usize,
    parents: Vec<usize>,
    card: usize,
}

/// Uniform CPT for every chance node without a table.
pub fn with_uniform_tables(structure: &NetworkDoc) -> Result<NetworkDoc> {
    let mut doc = structure.clone();
    let cards: HashMap<String, usize> = doc.nodes.iter().map(|n| (n.name.clone(), n.states.len())).collect();
    for n in doc.nodes.iter_mut().filter(|n| n.kind == NodeKind::Chance) {
        let configs: usize = n
            .parents
            .iter()
            .map(|p| cards.get(p).copied().ok_or_else(|| mdss_core::CoreError::UnknownNode(p.clone())))
            .product::<std::result::Result<usize, _>>()?;
        let k = n.states.len();
        n.table = Some(TableSpec::Explicit {
            values: vec![1.0 / k as f64; configs * k],
        });
    }
    Ok(doc)
}

fn install(doc: &mut NetworkDoc, values: &[Vec<f64>], names: &[String]) {
    for (name, v) in names.iter().zip(values) {
        let node: &mut NodeSpec = doc.node_mut(name).expect("fitted node exists");
        node.table = Some(TableSpec::Explicit { values: v.clone() });
    }
}

/// Fits every chance CPT of `structure` to `data`.
pub fn em_fit(structure: &NetworkDoc, data: &CaseDataset, cfg: &EmConfig) -> Result<FitReport> {
    if data.is_empty() {
        return Err(LearningError::EmptyDataset);
    }
    if cfg.pseudo_count.is_nan() || cfg.pseudo_count <= 0.0 {
        return Err(LearningError::Invalid("pseudo-count must be positive".into()));
    }
    if let Some(n) = structure.nodes.iter().find(|n| n.kind != NodeKind::Chance) {
        return Err(LearningError::Invalid(format!(
            "EM needs a chance-only network; `{}` is a {:?} node",
            n.name, n.kind
        )));
    }
    data.check_against(structure)?;
    let mut doc = with_uniform_tables(structure)?;
    let names: Vec<String> = doc.nodes.iter().map(|n| n.name.clone()).collect();
    let col: Vec<usize> = names.iter().map(|n| data.column_index(n).expect("schema checked")).collect();
    let vars: Vec<Variable> = names.iter().map(|n| doc.variable(n)).collect::<std::result::Result<_, _>>()?;
    let pos = |n: &str| names.iter().position(|m| m == n).expect("parent is a node");
    let families: Vec<Family> = doc
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| Family {
            child: i,
            parents: n.parents.iter().map(|p| pos(p)).collect(),
            card: n.states.len(),
        })
        .collect();

    // distinct observation patterns, node order
    let mut patterns: HashMap<Vec<Option<usize>>, f64> = HashMap::new();
    for row in data.rows() {
        let pat: Vec<Option<usize>> = col.iter().map(|&c| row[c]).collect();
        *patterns.entry(pat).or_insert(0.0) += 1.0;
    }
    let mut patterns: Vec<(Vec<Option<usize>>, f64)> = patterns.into_iter().collect();
    patterns.sort_by(|a, b| a.0.cmp(&b.0));
    let (complete, partial): (Vec<_>, Vec<_>) = patterns.into_iter().partition(|(p, _)| p.iter().all(Option::is_some));

    let row_offset = |f: &Family, assign: &[usize]| -> usize {
        f.parents.iter().fold(0, |acc, &p| acc * vars[p].cardinality() + assign[p])
    };
    // complete rows contribute fixed counts
    let mut fixed: Vec<Vec<f64>> = families
        .iter()
        .map(|f| {
            let rows: usize = f.parents.iter().map(|&p| vars[p].cardinality()).product();
            vec![0.0; rows * f.card]
        })
        .collect();
    for (pat, n) in &complete {
        let assign: Vec<usize> = pat.iter().map(|c| c.expect("complete")).collect();
        for (fi, f) in families.iter().enumerate() {
            fixed[fi][row_offset(f, &assign) * f.card + assign[f.child]] += n;
        }
    }

    let mut trace = Vec::new();
    let mut loglik = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut params: Vec<Vec<f64>> = families
        .iter()
        .map(|f| {
            let rows: usize = f.parents.iter().map(|&p| vars[p].cardinality()).product();
            vec![1.0 / f.card as f64; rows * f.card]
        })
        .collect();
    loop {
        // E-step
        let mut ll = 0.0;
        for (pat, n) in &complete {
            let assign: Vec<usize> = pat.iter().map(|c| c.expect("complete")).collect();
            let mut lp = 0.0;
            for (fi, f) in families.iter().enumerate() {
                lp += params[fi][row_offset(f, &assign) * f.card + assign[f.child]].ln();
            }
            ll += n * lp;
        }
        let mut counts = fixed.clone();
        if !partial.is_empty() {
            let net = BayesNet::from_doc(&doc)?;
            let mut session = InferenceSession::new(net)?;
            for (pat, n) in &partial {
                session.clear_evidence();
                for (i, c) in pat.iter().enumerate() {
                    if let Some(s) = c {
                        session.set_evidence(Evidence::hard(names[i].clone(), *s))?;
                    }
                }
                ll += n * session.log_probability_of_evidence()?;
                for (fi, name) in names.iter().enumerate() {
                    let fam = session.family_marginal(name)?;
                    for (c, p) in counts[fi].iter_mut().zip(fam.values()) {
                        *c += n * p;
                    }
                }
            }
        }
        let prior: f64 = params.iter().flatten().map(|t| t.ln()).sum::<f64>() * cfg.pseudo_count;
        let objective = ll + prior;
        if let Some(&last) = trace.last() {
            if objective - last < cfg.tol {
                trace.push(objective);
                loglik.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(objective);
        loglik.push(ll);
        if iterations >= cfg.max_iter {
            break;
        }
        // M-step
        for (fi, f) in families.iter().enumerate() {
            for (row, out) in counts[fi].chunks(f.card).zip(params[fi].chunks_mut(f.card)) {
                let total: f64 = row.iter().sum::<f64>() + cfg.pseudo_count * f.card as f64;
                for (o, c) in out.iter_mut().zip(row) {
                    *o = (c + cfg.pseudo_count) / total;
                }
            }
            // rows are exact up to rounding; renormalise against drift
            for out in params[fi].chunks_mut(f.card) {
                let s: f64 = out.iter().sum();
                out.iter_mut().for_each(|v| *v /= s);
            }
        }
        install(&mut doc, &params, &names);
        iterations += 1;
    }
    install(&mut doc, &params, &names);
    Ok(FitReport {
        network: doc,
        trace,
        loglik,
        iterations,
        converged,
    })
}

/// Smoothed relative frequencies from complete rows only (the closed form
/// EM reaches in one step on complete data).
pub fn smoothed_frequencies(structure: &NetworkDoc, data: &CaseDataset, pseudo_count: f64) -> Result<Vec<Cpt>> {
    let doc = with_uniform_tables(structure)?;
    let mut out = Vec::new();
    for n in &doc.nodes {
        let child = doc.variable(&n.name)?;
        let parents: Vec<Variable> = n.parents.iter().map(|p| doc.variable(p)).collect::<std::result::Result<_, _>>()?;
        let rows: usize = parents.iter().map(Variable::cardinality).product();
        let k = child.cardinality();
        let mut counts = vec![pseudo_count; rows * k];
        let cc = data.require_column(&n.name)?;
        let pc: Vec<usize> = n.parents.iter().map(|p| data.require_column(p)).collect::<Result<_>>()?;
        for row in data.rows() {
            let Some(c) = row[cc] else { continue };
            let mut off = 0;
            let mut ok = true;
            for (p, &col) in parents.iter().zip(&pc) {
                match row[col] {
                    Some(s) => off = off * p.cardinality() + s,
                    None => ok = false,
                }
            }
            if ok {
                counts[off * k + c] += 1.0;
            }
        }
        for r in counts.chunks_mut(k) {
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|v| *v /= s);
        }
        out.push(Cpt::new(child, parents, counts)?);
    }
    Ok(out)
}
