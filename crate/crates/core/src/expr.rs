//! Expression-generated CPTs.
//!
//! Only the constructs the bundled models need: Bernoulli rows driven by a
//! numeric parameter node, constants, copying a parent's state, switching on
//! a parent's state and `if` chains combining them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::factor::{Cpt, Variable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum CptExpr {
    /// Binary child with `P(child = state 1)` equal to the numeric label of
    /// the parameter parent's current state (its complement when flagged).
    Bernoulli {
        parameter: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        complement: bool,
    },
    /// Child takes the named state with certainty.
    Constant { state: String },
    /// Child takes the state whose label equals the parent's current label.
    Copy { parent: String },
    /// Child distribution chosen by the switch parent's state label.
    Select {
        switch: String,
        cases: BTreeMap<String, CptExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Box<CptExpr>>,
    },
    /// `if(parent == equals, then, else)`.
    If {
        parent: String,
        equals: String,
        then: Box<CptExpr>,
        #[serde(rename = "else")]
        otherwise: Box<CptExpr>,
    },
}

impl CptExpr {
    pub fn bernoulli(parameter: impl Into<String>) -> Self {
        CptExpr::Bernoulli {
            parameter: parameter.into(),
            complement: false,
        }
    }

    pub fn constant(state: impl Into<String>) -> Self {
        CptExpr::Constant {
            state: state.into(),
        }
    }

    pub fn copy(parent: impl Into<String>) -> Self {
        CptExpr::Copy {
            parent: parent.into(),
        }
    }

    pub fn if_eq(parent: impl Into<String>, equals: impl Into<String>, then: CptExpr, otherwise: CptExpr) -> Self {
        CptExpr::If {
            parent: parent.into(),
            equals: equals.into(),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Every parent name the expression reads.
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CptExpr::Bernoulli { parameter, .. } => out.push(parameter),
            CptExpr::Constant { .. } => {}
            CptExpr::Copy { parent } => out.push(parent),
            CptExpr::Select {
                switch,
                cases,
                default,
            } => {
                out.push(switch);
                for c in cases.values() {
                    c.collect_refs(out);
                }
                if let Some(d) = default {
                    d.collect_refs(out);
                }
            }
            CptExpr::If {
                parent,
                then,
                otherwise,
                ..
            } => {
                out.push(parent);
                then.collect_refs(out);
                otherwise.collect_refs(out);
            }
        }
    }

    /// Same expression with every parent reference passed through `f`.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> CptExpr {
        match self {
            CptExpr::Bernoulli {
                parameter,
                complement,
            } => CptExpr::Bernoulli {
                parameter: f(parameter),
                complement: *complement,
            },
            CptExpr::Constant { state } => CptExpr::Constant {
                state: state.clone(),
            },
            CptExpr::Copy { parent } => CptExpr::Copy { parent: f(parent) },
            CptExpr::Select {
                switch,
                cases,
                default,
            } => CptExpr::Select {
                switch: f(switch),
                cases: cases.iter().map(|(k, v)| (k.clone(), v.rename(f))).collect(),
                default: default.as_ref().map(|d| Box::new(d.rename(f))),
            },
            CptExpr::If {
                parent,
                equals,
                then,
                otherwise,
            } => CptExpr::If {
                parent: f(parent),
                equals: equals.clone(),
                then: Box::new(then.rename(f)),
                otherwise: Box::new(otherwise.rename(f)),
            },
        }
    }

    fn eval(&self, child: &Variable, parents: &[Variable], config: &[usize]) -> Result<Vec<f64>> {
        let err = |reason: String| CoreError::Expression {
            node: child.name().to_string(),
            reason,
        };
        let label_of = |name: &str| -> Result<(&Variable, &str)> {
            let i = parents
                .iter()
                .position(|p| p.name() == name)
                .ok_or_else(|| err(format!("`{name}` is not a parent")))?;
            Ok((&parents[i], parents[i].states()[config[i]].as_str()))
        };
        let card = child.cardinality();
        match self {
            CptExpr::Bernoulli {
                parameter,
                complement,
            } => {
                if card != 2 {
                    return Err(err("bernoulli needs a binary child".into()));
                }
                let (_, label) = label_of(parameter)?;
                let p: f64 = label
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("parameter state `{label}` is not numeric")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(err(format!("parameter value {p} outside [0,1]")));
                }
                let p = if *complement { 1.0 - p } else { p };
                Ok(vec![1.0 - p, p])
            }
            CptExpr::Constant { state } => {
                let idx = child
                    .state_index(state)
                    .ok_or_else(|| err(format!("no child state `{state}`")))?;
                let mut row = vec![0.0; card];
                row[idx] = 1.0;
                Ok(row)
            }
            CptExpr::Copy { parent } => {
                let (_, label) = label_of(parent)?;
                let idx = child
                    .state_index(label)
                    .ok_or_else(|| err(format!("child has no state `{label}` to copy from `{parent}`")))?;
                let mut row = vec![0.0; card];
                row[idx] = 1.0;
                Ok(row)
            }
            CptExpr::Select {
                switch,
                cases,
                default,
            } => {
                let (_, label) = label_of(switch)?;
                match (cases.get(label), default) {
                    (Some(e), _) => e.eval(child, parents, config),
                    (None, Some(d)) => d.eval(child, parents, config),
                    (None, None) => Err(err(format!("no case for `{switch}` = `{label}`"))),
                }
            }
            CptExpr::If {
                parent,
                equals,
                then,
                otherwise,
            } => {
                let (var, label) = label_of(parent)?;
                if var.state_index(equals).is_none() {
                    return Err(err(format!("`{parent}` has no state `{equals}`")));
                }
                if label == equals {
                    then.eval(child, parents, config)
                } else {
                    otherwise.eval(child, parents, config)
                }
            }
        }
    }

    /// Tabulates the expression into an explicit CPT over `parents ++ [child]`.
    pub fn expand(&self, child: &Variable, parents: &[Variable]) -> Result<Cpt> {
        for r in self.references() {
            if !parents.iter().any(|p| p.name() == r) {
                return Err(CoreError::Expression {
                    node: child.name().to_string(),
                    reason: format!("`{r}` is not a parent"),
                });
            }
        }
        let configs: usize = parents.iter().map(Variable::cardinality).product();
        let mut values = Vec::with_capacity(configs * child.cardinality());
        let mut config = vec![0usize; parents.len()];
        for _ in 0..configs {
            values.extend(self.eval(child, parents, &config)?);
            for pos in (0..parents.len()).rev() {
                config[pos] += 1;
                if config[pos] < parents[pos].cardinality() {
                    break;
                }
                config[pos] = 0;
            }
        }
        Cpt::new(child.clone(), parents.to_vec(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, states: &[&str]) -> Variable {
        Variable::new(name, states.to_vec()).unwrap()
    }

    #[test]
    fn bernoulli_on_grid_matches_direct_rows() {
        let labels: Vec<String> = (0..=10).map(|i| format!("{:.1}", i as f64 / 10.0)).collect();
        let alpha = Variable::new("alpha", labels.clone()).unwrap();
        let child = var("c", &["defect", "cooperate"]);
        let cpt = CptExpr::bernoulli("alpha").expand(&child, &[alpha]).unwrap();
        for (i, l) in labels.iter().enumerate() {
            let p: f64 = l.parse().unwrap();
            assert_eq!(cpt.row(&[i]), &[1.0 - p, p]);
        }
    }

    #[test]
    fn bernoulli_zero_parameter_is_degenerate() {
        let delta = var("delta", &["0.00", "0.50"]);
        let child = var("s", &["0", "1"]);
        let cpt = CptExpr::bernoulli("delta").expand(&child, std::slice::from_ref(&delta)).unwrap();
        assert_eq!(cpt.row(&[0]), &[1.0, 0.0]);
        let stop = CptExpr::Bernoulli {
            parameter: "delta".into(),
            complement: true,
        }
        .expand(&child, &[delta])
        .unwrap();
        assert_eq!(stop.row(&[0]), &[0.0, 1.0]);
    }

    #[test]
    fn non_numeric_parameter_is_rejected() {
        let p = var("p", &["low", "high"]);
        let child = var("c", &["0", "1"]);
        let e = CptExpr::bernoulli("p").expand(&child, &[p]).unwrap_err();
        assert!(matches!(e, CoreError::Expression { .. }));
    }

    #[test]
    fn select_without_case_is_rejected() {
        let sw = var("sw", &["a", "b"]);
        let child = var("c", &["x", "y"]);
        let mut cases = BTreeMap::new();
        cases.insert("a".to_string(), CptExpr::constant("x"));
        let e = CptExpr::Select {
            switch: "sw".into(),
            cases: cases.clone(),
            default: None,
        };
        assert!(e.expand(&child, std::slice::from_ref(&sw)).is_err());
        let e = CptExpr::Select {
            switch: "sw".into(),
            cases,
            default: Some(Box::new(CptExpr::constant("y"))),
        };
        let cpt = e.expand(&child, &[sw]).unwrap();
        assert_eq!(cpt.values(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rename_rewrites_every_reference() {
        let e = CptExpr::if_eq("stop", "1", CptExpr::constant("stop"), CptExpr::copy("Firm2"));
        let r = e.rename(&|n| format!("D1.{n}"));
        assert_eq!(r.references(), vec!["D1.stop", "D1.Firm2"]);
    }
}
