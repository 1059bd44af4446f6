//! Grading, bootstrap statistics, multiple-comparison correction, the
//! context-relevance taxonomy and report assembly.

mod report;
mod scoring;
mod stats;
mod taxonomy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::gateway::GatewayError;
use crate::pipeline::{AnswerMode, AnswerTrace};

pub use report::{
    build_report, format_accuracy, Comparison, ConditionSummary, ConditionTaxonomy, EvalReport,
    ReportLine, SubspecialtyCell, SubspecialtyRow,
};
pub use scoring::{
    auto_match, judge_model, judge_prompt, normalize, parse_verdict, reference_terms, MatchMode,
    JUDGE_SYSTEM_PROMPT,
};
pub use stats::{
    accuracy, bh_fdr, bootstrap_summary, paired_bootstrap_test, percentile, BootstrapSummary,
    FdrResult, ScoreVector, StatsConfig, DEFAULT_RESAMPLES, DEFAULT_SEED,
};
pub use taxonomy::{format_share, rounded_percent, taxonomy_report, TaxonomyCounts};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("score vector is empty")]
    EmptyScores,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("conditions {a} and {b} are not aligned on the same items")]
    Misaligned { a: String, b: String },
    #[error("invalid statistics config: {0}")]
    InvalidConfig(String),
    #[error("p-value {0} outside [0, 1]")]
    PValueOutOfRange(f64),
    #[error("answer and reference must be non-empty")]
    EmptyText,
    #[error("judge verdict could not be parsed: {verdict:?}")]
    Ungradable { verdict: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid grade: {0}")]
    InvalidGrade(String),
    #[error("{} trace(s) are not graded: {}", .0.len(), .0.join(", "))]
    Ungraded(Vec<String>),
    #[error("condition {condition} has no trace for item(s): {}", items.join(", "))]
    MissingTraces {
        condition: String,
        items: Vec<String>,
    },
    #[error("malformed report line {line}: {message}")]
    MalformedReport { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grader {
    Human,
    AutoMatch,
    JudgeModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub trace_id: String,
    /// 1 if the answer correctly addresses the question, else 0.
    pub correct: u8,
    /// 1 if the retrieved context was relevant; RAG traces only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_relevant: Option<u8>,
    pub grader: Grader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl GradeRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.trace_id.trim().is_empty() {
            return Err(EvalError::InvalidGrade("trace_id must be non-empty".into()));
        }
        if self.correct > 1 {
            return Err(EvalError::InvalidGrade(format!(
                "correct must be 0 or 1, got {}",
                self.correct
            )));
        }
        if let Some(r) = self.context_relevant.filter(|&r| r > 1) {
            return Err(EvalError::InvalidGrade(format!(
                "context_relevant must be 0 or 1, got {r}"
            )));
        }
        Ok(())
    }

    /// Field checks plus the rule that only RAG traces carry relevance.
    pub fn validate_against(&self, trace: &AnswerTrace) -> Result<(), EvalError> {
        self.validate()?;
        if self.trace_id != trace.trace_id {
            return Err(EvalError::InvalidGrade("grade and trace ids differ".into()));
        }
        if self.context_relevant.is_some() && trace.mode != AnswerMode::Rag {
            return Err(EvalError::InvalidGrade(format!(
                "trace {} is {}; context_relevant applies to rag traces only",
                trace.trace_id, trace.mode
            )));
        }
        Ok(())
    }
}

/// Keeps the last grade per trace id, in order of first appearance.
pub fn latest_grades(grades: &[GradeRecord]) -> Vec<GradeRecord> {
    let mut order = Vec::new();
    let mut latest: HashMap<&str, &GradeRecord> = HashMap::new();
    for g in grades {
        if latest.insert(g.trace_id.as_str(), g).is_none() {
            order.push(g.trace_id.as_str());
        }
    }
    order.into_iter().map(|id| latest[id].clone()).collect()
}

/// Grades every dataset trace with [`auto_match`]. RAG traces also get a
/// relevance grade: 1 when the retrieved context itself matches the
/// reference. Failed or empty answers score 0.
pub fn auto_grade(dataset: &Dataset, traces: &[AnswerTrace], mode: MatchMode) -> Vec<GradeRecord> {
    traces
        .iter()
        .filter_map(|t| {
            let item = dataset.get(t.item_id.as_deref()?)?;
            let score = |text: &str| auto_match(text, &item.reference_answer, mode).unwrap_or(0);
            let (correct, notes) = if t.answer.trim().is_empty() {
                (0, Some("no answer".to_string()))
            } else {
                (score(&t.answer), None)
            };
            let context_relevant = (t.mode == AnswerMode::Rag).then(|| {
                let context: Vec<&str> = t
                    .context_chunks
                    .iter()
                    .map(|c| c.chunk.text.as_str())
                    .collect();
                if context.is_empty() {
                    0
                } else {
                    score(&context.join("\n"))
                }
            });
            Some(GradeRecord {
                trace_id: t.trace_id.clone(),
                correct,
                context_relevant,
                grader: Grader::AutoMatch,
                notes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grade(id: &str, correct: u8, relevant: Option<u8>) -> GradeRecord {
        GradeRecord {
            trace_id: id.into(),
            correct,
            context_relevant: relevant,
            grader: Grader::Human,
            notes: None,
        }
    }

    #[test]
    fn grade_validation() {
        assert!(grade("t", 1, Some(0)).validate().is_ok());
        assert!(grade("t", 2, None).validate().is_err());
        assert!(grade("t", 1, Some(3)).validate().is_err());
        assert!(grade(" ", 1, None).validate().is_err());
    }

    #[test]
    fn later_grades_replace_earlier_ones() {
        let grades = [
            grade("a", 0, None),
            grade("b", 1, None),
            grade("a", 1, None),
        ];
        let latest = latest_grades(&grades);
        assert_eq!(latest, [grade("a", 1, None), grade("b", 1, None)]);
    }

    #[test]
    fn grade_json_shape() {
        let g = grade("tr-1", 1, Some(1));
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(
            json,
            r#"{"trace_id":"tr-1","correct":1,"context_relevant":1,"grader":"human"}"#
        );
        let back: GradeRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
