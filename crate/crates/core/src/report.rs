//! JSON evaluation report. The CLI's `--format json` output and the service's
//! `POST /api/evaluate` body are both produced here, so they match byte for byte.

use serde::{Deserialize, Serialize};

use crate::gk::{explain, AttributeDegrees, ExplainedRule, QualityLevel, ScoredCandidate};
use crate::inference::RuleBase;

/// Rules listed in a report.
pub const REPORT_TOP_RULES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Rounded to one decimal place.
    pub score: f64,
    pub score_exact: f64,
    pub level: QualityLevel,
    pub level_name: String,
    pub degenerate: bool,
    pub degrees: Vec<AttributeDegrees>,
    pub top_rules: Vec<ExplainedRule>,
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl EvaluationReport {
    pub fn new(candidate: &ScoredCandidate, rulebase: &RuleBase) -> Self {
        let explanation = explain(candidate, rulebase, REPORT_TOP_RULES);
        EvaluationReport {
            score: round1(candidate.score),
            score_exact: candidate.score,
            level: candidate.level,
            level_name: candidate.level.name().to_string(),
            degenerate: candidate.trace.degenerate,
            degrees: explanation.degrees,
            top_rules: explanation.rules,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
