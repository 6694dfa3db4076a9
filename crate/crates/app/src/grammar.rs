//! Command-line evidence: `Node=State` (hard) or `Node~w1,w2,...` (likelihood).

use mdss_models::EvidenceInput;

use crate::error::{ApiError, ApiResult};

pub const EVIDENCE_GRAMMAR: &str = "evidence is `Node=State` or `Node~w1,w2,...`";

pub fn parse_evidence(text: &str) -> ApiResult<EvidenceInput> {
    let bad = || ApiError::usage(format!("cannot parse evidence `{text}`: {EVIDENCE_GRAMMAR}"));
    if let Some((node, weights)) = text.split_once('~') {
        let node = node.trim();
        if node.is_empty() {
            return Err(bad());
        }
        let w = weights
            .split(',')
            .map(|w| w.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        return Ok(EvidenceInput::likelihood(node, w));
    }
    match text.split_once('=') {
        Some((node, state)) if !node.trim().is_empty() && !state.trim().is_empty() => {
            Ok(EvidenceInput::hard(node.trim(), state.trim()))
        }
        _ => Err(bad()),
    }
}
