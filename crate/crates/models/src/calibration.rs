//! Choice of stage count and AA coupling against published expected utilities.

use mdss_core::{Coupling, DecisionProblem};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::global::{build_global_with, GlobalConfig, StopOverride, BASELINE_STOP};
use crate::payoff::PayoffMatrix;
use crate::strategy::StrategyParams;
use crate::sweep::{first_move_eus, SweepConfig, PUBLISHED};

pub const STAGE_CANDIDATES: [usize; 4] = [2, 3, 4, 5];
pub const COUPLING_CANDIDATES: [Coupling; 2] = [Coupling::SharedAa, Coupling::PerStageAa];

/// Mean relative error a configuration must reach to count as calibrated.
pub const CALIBRATION_TARGET: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TargetValue {
    pub label: String,
    pub published: f64,
    pub computed: f64,
}

impl TargetValue {
    pub fn relative_error(&self) -> f64 {
        (self.computed - self.published).abs() / self.published.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub n_stages: usize,
    pub coupling: Coupling,
    pub mean_relative_error: f64,
    pub targets: Vec<TargetValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    pub candidates: Vec<Candidate>,
    pub best_stages: usize,
    pub best_coupling: Coupling,
    pub best_error: f64,
    pub within_target: bool,
}

fn tft_eu(payoff: PayoffMatrix, p: f64, n: usize, coupling: Coupling) -> Result<(f64, f64)> {
    let cfg = GlobalConfig {
        payoff,
        strategy: StrategyParams::tft(),
        n_stages: n,
        coupling,
        stop_override: Some(StopOverride::new(p)),
        ..GlobalConfig::default()
    };
    let r = DecisionProblem::from_flat(&build_global_with(None, &cfg)?)?.evaluate(&[])?;
    Ok((r.eu_of("defect").expect("defect"), r.eu_of("cooperate").expect("cooperate")))
}

pub fn evaluate_candidate(n: usize, coupling: Coupling) -> Result<Candidate> {
    let perfect = PayoffMatrix::perfect_substitutes();
    let imperfect = PayoffMatrix::imperfect_substitutes();
    let mut targets = Vec::new();
    let mut push = |label: &str, published: f64, computed: f64| {
        targets.push(TargetValue {
            label: label.into(),
            published,
            computed,
        })
    };
    let (d, c) = tft_eu(perfect, BASELINE_STOP, n, coupling)?;
    push("perfect, p=0.0189, EU(cooperate)", 443.40, c);
    push("perfect, p=0.0189, EU(defect)", 385.47, d);
    let (d, c) = tft_eu(perfect, 0.9435, n, coupling)?;
    push("perfect, p=0.9435, EU(defect)", 394.72, d);
    push("perfect, p=0.9435, EU(cooperate)", 350.93, c);
    let (_, c) = tft_eu(perfect, 0.2915, n, coupling)?;
    push("perfect, p=0.2915, EU(cooperate)", 416.14, c);
    let (d, c) = tft_eu(imperfect, BASELINE_STOP, n, coupling)?;
    push("imperfect, p=0.0189, EU(cooperate)", 601.33, c);
    push("imperfect, p=0.0189, EU(defect)", 513.21, d);
    let sweep = SweepConfig {
        n_stages: n,
        coupling,
        ..SweepConfig::default()
    };
    let rows = [(13, "TFT", StrategyParams::tft()), (1, "0.8/0.25", StrategyParams::generalized(0.8, 0.25))];
    for (row, name, strategy) in rows {
        for (k, cond) in ["none", "E1", "E2"].iter().enumerate() {
            let (d, c, _) = first_move_eus(&sweep, &strategy, k)?;
            let (pd, pc) = PUBLISHED[row][k];
            push(&format!("{name}, {cond}, EU(defect)"), pd, d);
            push(&format!("{name}, {cond}, EU(cooperate)"), pc, c);
        }
    }
    let mean_relative_error = targets.iter().map(TargetValue::relative_error).sum::<f64>() / targets.len() as f64;
    Ok(Candidate {
        n_stages: n,
        coupling,
        mean_relative_error,
        targets,
    })
}

/// Evaluates every candidate; ties go to the earlier one.
pub fn calibrate() -> Result<CalibrationReport> {
    let mut candidates = Vec::new();
    for n in STAGE_CANDIDATES {
        for c in COUPLING_CANDIDATES {
            candidates.push(evaluate_candidate(n, c)?);
        }
    }
    let best = candidates
        .iter()
        .fold(None::<&Candidate>, |b, c| match b {
            Some(b) if b.mean_relative_error <= c.mean_relative_error => Some(b),
            _ => Some(c),
        })
        .expect("candidates are nonempty")
        .clone();
    Ok(CalibrationReport {
        best_stages: best.n_stages,
        best_coupling: best.coupling,
        best_error: best.mean_relative_error,
        within_target: best.mean_relative_error <= CALIBRATION_TARGET,
        candidates,
    })
}
