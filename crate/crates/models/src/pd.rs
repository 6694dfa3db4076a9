//! Prisoner's-dilemma stage networks and the repeated game.

use mdss_core::oobn::{self, InputDecl, Interface, CARRY_IN, CARRY_OUT, STOP_IN};
use mdss_core::{ClassDoc, Coupling, CptExpr, EvidenceKind, FlatNetwork, NetworkDoc, NodeKind, NodeSpec, TableSpec};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::payoff::PayoffMatrix;
use crate::strategy::{grid_index, grid_labels, AlphaBelief, StrategyMode, StrategyParams, GRID_POINTS};

pub const FIRM1: &str = CARRY_IN;
pub const FIRM1_STAR: &str = CARRY_OUT;
pub const FIRM2: &str = "Firm2";
pub const UTILITY: &str = "U2";
pub const STOP: &str = STOP_IN;
pub const DELTA: &str = "delta";
pub const ALPHA_C: &str = "alpha_C";
pub const ALPHA_D: &str = "alpha_D";
/// Rival's next move when Firm2 cooperates (generalized strategy).
pub const NEXT_IF_C: &str = "Firm1StarIfC";
/// Rival's next move when Firm2 defects (generalized strategy).
pub const NEXT_IF_D: &str = "Firm1StarIfD";

pub const DEFECT: &str = "defect";
pub const COOPERATE: &str = "cooperate";
pub const STOPPED: &str = "stop";
pub const ACTIONS: [&str; 2] = [DEFECT, COOPERATE];
pub const MOVES: [&str; 3] = [DEFECT, COOPERATE, STOPPED];
pub const STOP_STATES: [&str; 2] = ["0", "1"];

/// How a stop signal acts on later stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Only the current stage's signal decides whether the rival plays next.
    #[default]
    Memoryless,
    /// Once stopped, the rival stays stopped.
    Absorbing,
}

/// Where the stage's stop signal comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopSource {
    /// Interface input, bound to an AA instance by the unroller.
    Input,
    /// `stop? ~ Bin(1, 1 - delta)` inside the stage, with a uniform grid prior on delta.
    Delta,
}

/// One-shot game: Firm1 is a chance node with a uniform prior.
pub fn build_pd_stage(p: &PayoffMatrix) -> NetworkDoc {
    NetworkDoc::new(
        "PD",
        vec![
            NodeSpec::chance(FIRM1, &ACTIONS, &[], vec![0.5, 0.5]),
            NodeSpec::decision(FIRM2, &ACTIONS),
            NodeSpec::utility(UTILITY, &[FIRM1, FIRM2], p.utility_values(false)),
        ],
        vec![FIRM2.to_string()],
    )
}

/// One-shot game with a given prior on Firm1 (`[defect, cooperate]`).
pub fn build_pd_stage_with_prior(p: &PayoffMatrix, prior: [f64; 2]) -> NetworkDoc {
    let mut doc = build_pd_stage(p);
    doc.nodes[0].table = Some(TableSpec::Explicit { values: prior.to_vec() });
    doc
}

fn grid_node(name: &str) -> NodeSpec {
    let labels = grid_labels();
    let states: Vec<&str> = labels.iter().map(String::as_str).collect();
    NodeSpec::chance(name, &states, &[], vec![1.0 / GRID_POINTS as f64; GRID_POINTS])
}

/// Expression for the rival's next move.
pub fn next_move_expr(mode: StrategyMode, rule: StopRule) -> (CptExpr, Vec<&'static str>) {
    let (core, mut parents) = match mode {
        StrategyMode::Tft => (CptExpr::copy(FIRM2), vec![STOP, FIRM2]),
        StrategyMode::Generalized => (
            CptExpr::if_eq(FIRM2, DEFECT, CptExpr::copy(NEXT_IF_D), CptExpr::copy(NEXT_IF_C)),
            vec![STOP, FIRM2, NEXT_IF_C, NEXT_IF_D],
        ),
    };
    let stopped = CptExpr::if_eq(STOP, "1", CptExpr::constant(STOPPED), core);
    match rule {
        StopRule::Memoryless => (stopped, parents),
        StopRule::Absorbing => {
            parents.insert(0, FIRM1);
            (CptExpr::if_eq(FIRM1, STOPPED, CptExpr::constant(STOPPED), stopped), parents)
        }
    }
}

/// The Duopoly class: rival's move in, rival's next move out.
pub fn stage_class(p: &PayoffMatrix, mode: StrategyMode, source: StopSource, rule: StopRule) -> ClassDoc {
    let mut inputs = vec![InputDecl {
        name: FIRM1.into(),
        states: MOVES.iter().map(|s| s.to_string()).collect(),
        prior: Some(vec![0.5, 0.5, 0.0]),
    }];
    let mut nodes = Vec::new();
    match source {
        StopSource::Input => inputs.push(InputDecl {
            name: STOP.into(),
            states: STOP_STATES.iter().map(|s| s.to_string()).collect(),
            prior: Some(vec![1.0, 0.0]),
        }),
        StopSource::Delta => {
            nodes.push(grid_node(DELTA));
            nodes.push(NodeSpec::expression(
                STOP,
                &STOP_STATES,
                &[DELTA],
                CptExpr::Bernoulli {
                    parameter: DELTA.into(),
                    complement: true,
                },
            ));
        }
    }
    nodes.push(NodeSpec::decision(FIRM2, &ACTIONS));
    nodes.push(NodeSpec::utility(UTILITY, &[FIRM1, FIRM2], p.utility_values(true)));
    if mode == StrategyMode::Generalized {
        nodes.push(grid_node(ALPHA_C));
        nodes.push(grid_node(ALPHA_D));
        nodes.push(NodeSpec::expression(NEXT_IF_C, &ACTIONS, &[ALPHA_C], CptExpr::bernoulli(ALPHA_C)));
        nodes.push(NodeSpec::expression(NEXT_IF_D, &ACTIONS, &[ALPHA_D], CptExpr::bernoulli(ALPHA_D)));
    }
    let (expr, parents) = next_move_expr(mode, rule);
    nodes.push(NodeSpec::expression(FIRM1_STAR, &MOVES, &parents, expr));
    ClassDoc {
        name: "Duopoly".into(),
        interface: Interface {
            inputs,
            outputs: vec![FIRM1_STAR.into()],
        },
        nodes,
        decision_order: vec![FIRM2.into()],
        instances: vec![],
    }
}

/// Bakes the strategy beliefs into every stage of an unrolled game.
pub fn apply_strategy(flat: &FlatNetwork, s: &StrategyParams) -> Result<FlatNetwork> {
    s.validate()?;
    let mut out = if s.stage1_cooperates {
        flat.set_stage_override(1, FIRM1, COOPERATE)?
    } else {
        flat.clone()
    };
    if s.mode == StrategyMode::Generalized {
        let labels = grid_labels();
        for k in 1..=out.stage_count() {
            for (node, belief) in [(ALPHA_C, &s.alpha_c), (ALPHA_D, &s.alpha_d)] {
                out = match belief {
                    AlphaBelief::Uniform => out,
                    AlphaBelief::Point(v) => {
                        let i = grid_index(*v).expect("validated grid point");
                        out.set_stage_override(k, node, &labels[i])?
                    }
                    AlphaBelief::Likelihood(w) => out.with_stage_finding(k, node, EvidenceKind::Likelihood(w.clone()))?,
                };
            }
        }
    }
    Ok(out)
}

/// Repeated game whose termination is driven by the per-stage delta node.
pub fn build_repeated_pd(p: &PayoffMatrix, s: &StrategyParams, n_stages: usize) -> Result<FlatNetwork> {
    build_repeated_pd_with(p, s, n_stages, StopRule::default())
}

pub fn build_repeated_pd_with(p: &PayoffMatrix, s: &StrategyParams, n_stages: usize, rule: StopRule) -> Result<FlatNetwork> {
    let stage = stage_class(p, s.mode, StopSource::Delta, rule);
    let flat = oobn::unroll_repeated(&stage, None, n_stages, Coupling::SharedAa)?;
    apply_strategy(&flat, s)
}

/// Qualified names of the stage decisions, first stage first.
pub fn stage_decisions(flat: &FlatNetwork) -> Vec<String> {
    flat.doc
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Decision)
        .map(|n| n.name.clone())
        .collect()
}
