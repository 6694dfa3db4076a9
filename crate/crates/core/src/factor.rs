//! Discrete variables and table algebra.
//!
//! Tables are stored row-major over their scope: the first scope variable
//! varies slowest and the last varies fastest. Every file format and oracle
//! in the workspace relies on this layout.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A named discrete variable with an ordered list of state labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

impl Variable {
    /// Builds a variable; at least two distinct states are required.
    pub fn new<S: Into<String>>(name: impl Into<String>, states: Vec<S>) -> Result<Self> {
        let name = name.into();
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.len() < 2 {
            return Err(CoreError::InvalidVariable {
                name,
                reason: "at least two states are required".into(),
            });
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(CoreError::InvalidVariable {
                    name,
                    reason: format!("duplicate state label `{s}`"),
                });
            }
        }
        Ok(Variable { name, states })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Same variable under a different name (used when flattening instances).
    pub fn renamed(&self, name: impl Into<String>) -> Variable {
        Variable {
            name: name.into(),
            states: self.states.clone(),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.name, self.states.join(","))
    }
}

/// Real-valued table over an ordered scope. Shared machinery for
/// probability factors and utility potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    scope: Vec<Variable>,
    values: Vec<f64>,
}

pub(crate) fn strides(scope: &[Variable]) -> Vec<usize> {
    let mut out = vec![0; scope.len()];
    let mut acc = 1;
    for (i, v) in scope.iter().enumerate().rev() {
        out[i] = acc;
        acc *= v.cardinality();
    }
    out
}

fn check_unique(scope: &[Variable]) -> Result<()> {
    let mut seen = HashSet::new();
    for v in scope {
        if !seen.insert(v.name()) {
            return Err(CoreError::DuplicateVariable(v.name.clone()));
        }
    }
    Ok(())
}

/// Stride of each `target` variable inside `source`, or 0 when absent.
fn strides_in(target: &[Variable], source: &[Variable]) -> Vec<usize> {
    let src = strides(source);
    target
        .iter()
        .map(|v| {
            source
                .iter()
                .position(|s| s.name == v.name)
                .map(|i| src[i])
                .unwrap_or(0)
        })
        .collect()
}

/// Walks every assignment of `scope` in table order, calling `f` with the
/// linear offsets into each of the supplied stride sets.
fn odometer<const N: usize>(scope: &[Variable], maps: [&[usize]; N], mut f: impl FnMut([usize; N])) {
    let cards: Vec<usize> = scope.iter().map(Variable::cardinality).collect();
    let total: usize = cards.iter().product();
    let mut counter = vec![0usize; scope.len()];
    let mut offs = [0usize; N];
    for _ in 0..total {
        f(offs);
        for pos in (0..scope.len()).rev() {
            counter[pos] += 1;
            for (o, m) in offs.iter_mut().zip(maps.iter()) {
                *o += m[pos];
            }
            if counter[pos] < cards[pos] {
                break;
            }
            for (o, m) in offs.iter_mut().zip(maps.iter()) {
                *o -= m[pos] * cards[pos];
            }
            counter[pos] = 0;
        }
    }
}

impl Table {
    pub fn new(scope: Vec<Variable>, values: Vec<f64>) -> Result<Self> {
        check_unique(&scope)?;
        let expected: usize = scope.iter().map(Variable::cardinality).product();
        if values.len() != expected {
            return Err(CoreError::TableSize {
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::InvalidEntry(*bad));
        }
        Ok(Table { scope, values })
    }

    pub fn constant(scope: Vec<Variable>, value: f64) -> Result<Self> {
        let n = scope.iter().map(Variable::cardinality).product();
        Table::new(scope, vec![value; n])
    }

    pub fn scalar(value: f64) -> Self {
        Table {
            scope: Vec::new(),
            values: vec![value],
        }
    }

    pub fn scope(&self) -> &[Variable] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.scope.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.scope.iter().find(|v| v.name == name)
    }

    /// Value at a full assignment given as state indices in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let st = strides(&self.scope);
        let off: usize = assignment.iter().zip(&st).map(|(a, s)| a * s).sum();
        self.values[off]
    }

    /// Pointwise combination over the union scope (`self`'s order first).
    pub fn combine(&self, other: &Table, op: impl Fn(f64, f64) -> f64) -> Result<Table> {
        let mut scope = self.scope.clone();
        for v in &other.scope {
            match scope.iter().find(|s| s.name == v.name) {
                Some(existing) if existing.states != v.states => {
                    return Err(CoreError::StateMismatch(v.name.clone()))
                }
                Some(_) => {}
                None => scope.push(v.clone()),
            }
        }
        let sa = strides_in(&scope, &self.scope);
        let sb = strides_in(&scope, &other.scope);
        let total: usize = scope.iter().map(Variable::cardinality).product();
        let mut values = Vec::with_capacity(total);
        odometer(&scope, [&sa, &sb], |[ia, ib]| {
            values.push(op(self.values[ia], other.values[ib]));
        });
        Ok(Table { scope, values })
    }

    fn check_names(&self, names: &[&str]) -> Result<()> {
        for n in names {
            if !self.contains(n) {
                return Err(CoreError::NotInScope((*n).to_string()));
            }
        }
        Ok(())
    }

    /// Sums out every variable in `out`.
    pub fn sum_out(&self, out: &[&str]) -> Result<Table> {
        self.check_names(out)?;
        if out.is_empty() {
            return Ok(self.clone());
        }
        let kept: Vec<Variable> = self
            .scope
            .iter()
            .filter(|v| !out.contains(&v.name.as_str()))
            .cloned()
            .collect();
        let dst = strides_in(&self.scope, &kept);
        let total: usize = kept.iter().map(Variable::cardinality).product();
        let mut values = vec![0.0; total];
        let ident = strides(&self.scope);
        odometer(&self.scope, [&ident, &dst], |[src, d]| {
            values[d] += self.values[src];
        });
        Ok(Table {
            scope: kept,
            values,
        })
    }

    /// Maximises out `name`, returning the reduced table and, for each of
    /// its cells, the maximising state index (lowest index on ties).
    pub fn max_out(&self, name: &str) -> Result<(Table, Vec<usize>)> {
        let pos = self
            .position(name)
            .ok_or_else(|| CoreError::NotInScope(name.to_string()))?;
        let kept: Vec<Variable> = self
            .scope
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, v)| v.clone())
            .collect();
        let total: usize = kept.iter().map(Variable::cardinality).product();
        let mut values = vec![f64::NEG_INFINITY; total];
        let mut arg = vec![0usize; total];
        let dst = strides_in(&self.scope, &kept);
        let ident = strides(&self.scope);
        let st = strides(&self.scope);
        let card = self.scope[pos].cardinality();
        odometer(&self.scope, [&ident, &dst], |[src, d]| {
            let state = (src / st[pos]) % card;
            let v = self.values[src];
            if v > values[d] {
                values[d] = v;
                arg[d] = state;
            }
        });
        Ok((
            Table {
                scope: kept,
                values,
            },
            arg,
        ))
    }

    /// Fixes `name` to `state`, dropping it from the scope.
    pub fn slice(&self, name: &str, state: usize) -> Result<Table> {
        let pos = self
            .position(name)
            .ok_or_else(|| CoreError::NotInScope(name.to_string()))?;
        let card = self.scope[pos].cardinality();
        if state >= card {
            return Err(CoreError::UnknownState {
                node: name.to_string(),
                state: state.to_string(),
            });
        }
        let st = strides(&self.scope);
        let kept: Vec<Variable> = self
            .scope
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, v)| v.clone())
            .collect();
        let values = (0..self.values.len())
            .filter(|i| (i / st[pos]) % card == state)
            .map(|i| self.values[i])
            .collect();
        Ok(Table {
            scope: kept,
            values,
        })
    }

    /// Reorders the scope; `order` must be a permutation of the scope names.
    pub fn permute(&self, order: &[&str]) -> Result<Table> {
        if order.len() != self.scope.len() {
            return Err(CoreError::Invalid(format!(
                "permutation of {} names for a scope of {}",
                order.len(),
                self.scope.len()
            )));
        }
        let mut scope = Vec::with_capacity(order.len());
        for n in order {
            scope.push(
                self.variable(n)
                    .ok_or_else(|| CoreError::NotInScope((*n).to_string()))?
                    .clone(),
            );
        }
        check_unique(&scope)?;
        let src = strides_in(&scope, &self.scope);
        let mut values = Vec::with_capacity(self.values.len());
        odometer(&scope, [&src], |[s]| values.push(self.values[s]));
        Ok(Table { scope, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Table {
        Table {
            scope: self.scope.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn into_parts(self) -> (Vec<Variable>, Vec<f64>) {
        (self.scope, self.values)
    }
}

/// Finding on a single variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub node: String,
    pub kind: EvidenceKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum EvidenceKind {
    /// Observed state index.
    Hard(usize),
    /// Non-negative weight per state, not all zero. Not normalised.
    Likelihood(Vec<f64>),
}

impl Evidence {
    pub fn hard(node: impl Into<String>, state: usize) -> Self {
        Evidence {
            node: node.into(),
            kind: EvidenceKind::Hard(state),
        }
    }

    pub fn likelihood(node: impl Into<String>, weights: Vec<f64>) -> Self {
        Evidence {
            node: node.into(),
            kind: EvidenceKind::Likelihood(weights),
        }
    }

    /// Hard evidence from a state label.
    pub fn state(var: &Variable, label: &str) -> Result<Self> {
        let idx = var.state_index(label).ok_or_else(|| CoreError::UnknownState {
            node: var.name().to_string(),
            state: label.to_string(),
        })?;
        Ok(Evidence::hard(var.name(), idx))
    }

    /// Weight vector for `var`, checking shape and sign.
    pub fn weights(&self, var: &Variable) -> Result<Vec<f64>> {
        let card = var.cardinality();
        match &self.kind {
            EvidenceKind::Hard(s) => {
                if *s >= card {
                    return Err(CoreError::MalformedEvidence {
                        node: self.node.clone(),
                        reason: format!("state index {s} out of range (cardinality {card})"),
                    });
                }
                let mut w = vec![0.0; card];
                w[*s] = 1.0;
                Ok(w)
            }
            EvidenceKind::Likelihood(w) => {
                if w.len() != card {
                    return Err(CoreError::MalformedEvidence {
                        node: self.node.clone(),
                        reason: format!("{} weights for cardinality {card}", w.len()),
                    });
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(CoreError::MalformedEvidence {
                        node: self.node.clone(),
                        reason: "weights must be finite and non-negative".into(),
                    });
                }
                if w.iter().all(|x| *x == 0.0) {
                    return Err(CoreError::MalformedEvidence {
                        node: self.node.clone(),
                        reason: "weights are all zero".into(),
                    });
                }
                Ok(w.clone())
            }
        }
    }

    /// The finding as a one-variable factor.
    pub fn to_factor(&self, var: &Variable) -> Result<Factor> {
        Factor::new(vec![var.clone()], self.weights(var)?)
    }
}

/// Non-negative table: the currency of inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor(Table);

impl Factor {
    pub fn new(scope: Vec<Variable>, values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CoreError::InvalidEntry(*bad));
        }
        Ok(Factor(Table::new(scope, values)?))
    }

    /// Empty-scope factor with value 1.
    pub fn unit() -> Self {
        Factor(Table::scalar(1.0))
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    pub fn scope(&self) -> &[Variable] {
        self.0.scope()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn get(&self, assignment: &[usize]) -> f64 {
        self.0.get(assignment)
    }

    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        Ok(Factor(self.0.combine(&other.0, |a, b| a * b)?))
    }

    pub fn marginalize(&self, out: &[&str]) -> Result<Factor> {
        Ok(Factor(self.0.sum_out(out)?))
    }

    /// Keeps only `keep`, summing everything else out.
    pub fn project(&self, keep: &[&str]) -> Result<Factor> {
        for k in keep {
            if !self.contains(k) {
                return Err(CoreError::NotInScope((*k).to_string()));
            }
        }
        let out: Vec<&str> = self
            .scope()
            .iter()
            .map(Variable::name)
            .filter(|n| !keep.contains(n))
            .collect();
        self.marginalize(&out)
    }

    pub fn reduce(&self, e: &Evidence) -> Result<Factor> {
        let pos = self
            .0
            .position(&e.node)
            .ok_or_else(|| CoreError::NotInScope(e.node.clone()))?;
        let var = &self.scope()[pos];
        let w = e.weights(var)?;
        let wf = Table::new(vec![var.clone()], w)?;
        Ok(Factor(self.0.combine(&wf, |a, b| a * b)?.permute(
            &self.scope().iter().map(Variable::name).collect::<Vec<_>>(),
        )?))
    }

    /// Divides by the total; the total doubles as the probability of evidence.
    pub fn normalize(&self) -> Result<(Factor, f64)> {
        let z = self.sum();
        if z <= 0.0 {
            return Err(CoreError::ImpossibleEvidence);
        }
        Ok((Factor(self.0.map(|v| v / z)), z))
    }

    pub fn permute(&self, order: &[&str]) -> Result<Factor> {
        Ok(Factor(self.0.permute(order)?))
    }
}

/// Conditional probability table: scope is `parents ++ [child]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    child: Variable,
    parents: Vec<Variable>,
    factor: Factor,
}

pub const ROW_TOLERANCE: f64 = 1e-12;

impl Cpt {
    pub fn new(child: Variable, parents: Vec<Variable>, values: Vec<f64>) -> Result<Self> {
        let mut scope = parents.clone();
        scope.push(child.clone());
        let factor = Factor::new(scope, values)?;
        let card = child.cardinality();
        for row in factor.values().chunks(card) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(CoreError::RowNormalization {
                    child: child.name().to_string(),
                    sum,
                });
            }
        }
        Ok(Cpt {
            child,
            parents,
            factor,
        })
    }

    pub fn child(&self) -> &Variable {
        &self.child
    }

    pub fn parents(&self) -> &[Variable] {
        &self.parents
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn values(&self) -> &[f64] {
        self.factor.values()
    }

    /// Child distribution for a parent configuration (state indices in
    /// parent order).
    pub fn row(&self, parent_states: &[usize]) -> &[f64] {
        let card = self.child.cardinality();
        let mut off = 0;
        for (p, s) in self.parents.iter().zip(parent_states) {
            off = off * p.cardinality() + s;
        }
        &self.factor.values()[off * card..(off + 1) * card]
    }
}
