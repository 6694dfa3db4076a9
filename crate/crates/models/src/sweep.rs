//! Expected utilities of the first move over a grid of rival strategies and
//! three market-evidence conditions.

use std::fmt::Write as _;

use mdss_core::{Coupling, DecisionProblem, Evidence};
use serde::{Deserialize, Serialize};

use crate::aa::{e1, e2, fitted_aa, intervention_probability};
use crate::error::Result;
use crate::global::{build_global_with, GlobalConfig, StopOverride, BASELINE_STOP, CALIBRATED_COUPLING, CALIBRATED_STAGES};
use crate::payoff::PayoffMatrix;
use crate::pd::StopRule;
use crate::strategy::StrategyParams;

/// Stop probability of the first evidence condition.
pub const P_E1: f64 = 0.514;
/// Stop probability of the second evidence condition.
pub const P_E2: f64 = 0.95;

/// Rows whose published EU gap is at most this are excluded from the
/// argmax agreement count.
pub const AGREEMENT_GAP: f64 = 5.0;

pub const ALPHA_C_GRID: [f64; 4] = [1.0, 0.8, 0.6, 0.4];
pub const ALPHA_D_GRID: [f64; 3] = [0.25, 0.2, 0.1];

/// Published (EU defect, EU cooperate) per row and condition, in row order
/// (alpha_D blocks of alpha_C rows, then likelihood, then TFT).
pub const PUBLISHED: [[(f64, f64); 3]; 14] = [
    [(337., 388.), (329., 339.), (322., 298.)],
    [(286., 316.), (278., 277.), (271., 245.)],
    [(238., 250.), (228., 219.), (220., 193.)],
    [(203., 193.), (190., 170.), (180., 152.)],
    [(332., 388.), (326., 339.), (321., 298.)],
    [(281., 316.), (275., 277.), (270., 245.)],
    [(231., 247.), (225., 217.), (219., 193.)],
    [(192., 188.), (183., 167.), (177., 149.)],
    [(321., 388.), (321., 339.), (320., 298.)],
    [(270., 316.), (270., 277.), (269., 245.)],
    [(219., 243.), (219., 215.), (218., 193.)],
    [(172., 179.), (171., 159.), (170., 143.)],
    [(280., 313.), (273., 275.), (268., 243.)],
    [(385., 443.), (390., 394.), (395., 353.)],
];

/// How evidence conditions reach the game.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidencePath {
    /// Each condition is a stop-probability override of the first AA instance.
    #[default]
    Override,
    /// Market evidence enters the fitted AA network of the first stage.
    FullModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepConfig {
    pub p_none: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub n_stages: usize,
    pub coupling: Coupling,
    pub payoff: PayoffMatrix,
    #[serde(default)]
    pub path: EvidencePath,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_none: BASELINE_STOP,
            p_e1: P_E1,
            p_e2: P_E2,
            n_stages: CALIBRATED_STAGES,
            coupling: CALIBRATED_COUPLING,
            payoff: PayoffMatrix::perfect_substitutes(),
            path: EvidencePath::Override,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepCell {
    pub condition: String,
    pub stop_probability: f64,
    pub eu_defect: f64,
    pub eu_cooperate: f64,
    pub optimal: String,
    pub near_tie: bool,
    pub published_defect: f64,
    pub published_cooperate: f64,
    pub published_optimal: String,
}

impl SweepCell {
    pub fn published_gap(&self) -> f64 {
        (self.published_defect - self.published_cooperate).abs()
    }

    pub fn agrees(&self) -> bool {
        self.optimal == self.published_optimal
    }

    /// Mean relative error of the two EUs against the published pair.
    pub fn relative_error(&self) -> f64 {
        let d = (self.eu_defect - self.published_defect).abs() / self.published_defect.abs();
        let c = (self.eu_cooperate - self.published_cooperate).abs() / self.published_cooperate.abs();
        (d + c) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_d: Option<f64>,
    pub cells: Vec<SweepCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSummary {
    /// Cells whose published gap exceeds [`AGREEMENT_GAP`].
    pub compared: usize,
    pub agreeing: usize,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub config: SweepConfig,
    /// `P(AAIntervention = 1 | E1)` under the bundled fitted AA network.
    pub model_implied_e1: f64,
    /// `P(AAIntervention = 1 | E2)` under the bundled fitted AA network.
    pub model_implied_e2: f64,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

pub fn row_strategies() -> Vec<(String, Option<(f64, f64)>, StrategyParams)> {
    let mut out = Vec::new();
    for d in ALPHA_D_GRID {
        for c in ALPHA_C_GRID {
            out.push((format!("{c} / {d}"), Some((c, d)), StrategyParams::generalized(c, d)));
        }
    }
    out.push(("likelihood".into(), None, StrategyParams::likelihood_preset()));
    out.push(("TFT".into(), None, StrategyParams::tft()));
    out
}

fn optimal_of(defect: f64, cooperate: f64) -> &'static str {
    if cooperate > defect {
        "cooperate"
    } else {
        "defect"
    }
}

/// First-stage EUs `(defect, cooperate, near_tie)` for one strategy and condition.
pub fn first_move_eus(cfg: &SweepConfig, strategy: &StrategyParams, condition: usize) -> Result<(f64, f64, bool)> {
    let mut g = GlobalConfig {
        payoff: cfg.payoff,
        strategy: strategy.clone(),
        n_stages: cfg.n_stages,
        coupling: cfg.coupling,
        stop_rule: StopRule::default(),
        stop_override: None,
    };
    let mut evidence = Vec::new();
    let flat = match cfg.path {
        EvidencePath::Override => {
            let p = [cfg.p_none, cfg.p_e1, cfg.p_e2][condition];
            g.stop_override = Some(StopOverride::new(p));
            build_global_with(None, &g)?
        }
        EvidencePath::FullModel => {
            let flat = build_global_with(Some(fitted_aa()), &g)?;
            let findings = match condition {
                0 => vec![],
                1 => e1(),
                _ => e2(),
            };
            for (node, state) in findings {
                let name = format!("{}.{node}", mdss_core::oobn::aa_instance(1));
                evidence.push(Evidence::state(&flat.doc.variable(&name)?, state)?);
            }
            flat
        }
    };
    let r = DecisionProblem::from_flat(&flat)?.evaluate(&evidence)?;
    let eu = |a: &str| r.eu_of(a).expect("first decision has both moves");
    Ok((eu("defect"), eu("cooperate"), r.near_tie))
}

/// The full grid, evaluated row-parallel and assembled in row order.
pub fn table6_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let rows = row_strategies();
    let conditions = ["none", "E1", "E2"];
    let stops = [cfg.p_none, cfg.p_e1, cfg.p_e2];
    let model_implied_e1 = intervention_probability(fitted_aa(), &e1())?;
    let model_implied_e2 = intervention_probability(fitted_aa(), &e2())?;
    let computed: Vec<Result<Vec<(f64, f64, bool)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .iter()
            .map(|(_, _, s)| scope.spawn(move || (0..3).map(|k| first_move_eus(cfg, s, k)).collect::<Result<Vec<_>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker")).collect()
    });
    let mut out = Vec::with_capacity(rows.len());
    for (i, ((label, alphas, _), cells)) in rows.into_iter().zip(computed).enumerate() {
        let cells = cells?
            .into_iter()
            .enumerate()
            .map(|(k, (d, c, tie))| {
                let (pd, pc) = PUBLISHED[i][k];
                let stop_probability = match cfg.path {
                    EvidencePath::Override => stops[k],
                    EvidencePath::FullModel => [fitted_stop(), model_implied_e1, model_implied_e2][k],
                };
                SweepCell {
                    condition: conditions[k].into(),
                    stop_probability,
                    eu_defect: d,
                    eu_cooperate: c,
                    optimal: optimal_of(d, c).into(),
                    near_tie: tie,
                    published_defect: pd,
                    published_cooperate: pc,
                    published_optimal: optimal_of(pd, pc).into(),
                }
            })
            .collect();
        out.push(SweepRow {
            label,
            alpha_c: alphas.map(|a| a.0),
            alpha_d: alphas.map(|a| a.1),
            cells,
        });
    }
    let all: Vec<&SweepCell> = out.iter().flat_map(|r| &r.cells).collect();
    let gapped: Vec<&&SweepCell> = all.iter().filter(|c| c.published_gap() > AGREEMENT_GAP).collect();
    let errors: Vec<f64> = all.iter().map(|c| c.relative_error()).collect();
    let summary = SweepSummary {
        compared: gapped.len(),
        agreeing: gapped.iter().filter(|c| c.agrees()).count(),
        mean_relative_error: errors.iter().sum::<f64>() / errors.len() as f64,
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
    };
    Ok(SweepReport {
        config: cfg.clone(),
        model_implied_e1,
        model_implied_e2,
        rows: out,
        summary,
    })
}

fn fitted_stop() -> f64 {
    intervention_probability(fitted_aa(), &[]).expect("fitted AA network answers prior queries")
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    /// Table layout; `*` marks the optimum, published pair in brackets.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "first-move expected utilities, {} stages, {:?}, evidence via {:?}",
            self.config.n_stages, self.config.coupling, self.config.path
        );
        let _ = writeln!(
            out,
            "stop probability: none {:.4}, E1 {:.4}, E2 {:.4} (fitted AA network: E1 {:.4}, E2 {:.4})",
            self.config.p_none, self.config.p_e1, self.config.p_e2, self.model_implied_e1, self.model_implied_e2
        );
        let _ = writeln!(
            out,
            "{:<14} {:>27} {:>27} {:>27}",
            "alphaC / alphaD", "none: D  C [published]", "E1: D  C [published]", "E2: D  C [published]"
        );
        for row in &self.rows {
            let _ = write!(out, "{:<14}", row.label);
            for c in &row.cells {
                let (sd, sc) = if c.optimal == "defect" { ("*", " ") } else { (" ", "*") };
                let flag = if c.agrees() { ' ' } else { '!' };
                let cell = format!(
                    "{:.1}{} {:.1}{} [{:.0} {:.0}]{}",
                    c.eu_defect, sd, c.eu_cooperate, sc, c.published_defect, c.published_cooperate, flag
                );
                let _ = write!(out, " {cell:>27}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "argmax agreement (published gap > {AGREEMENT_GAP}): {}/{}; mean relative error {:.2}%, max {:.2}%",
            self.summary.agreeing,
            self.summary.compared,
            100.0 * self.summary.mean_relative_error,
            100.0 * self.summary.max_relative_error
        );
        out
    }
}
