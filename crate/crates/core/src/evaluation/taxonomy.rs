use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, GradeRecord};
use crate::pipeline::{AnswerMode, AnswerTrace};

/// Outcome of RAG answers split by whether the retrieved context was
/// relevant. An incorrect answer on relevant context counts as a
/// hallucination.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyCounts {
    pub relevant_correct: usize,
    pub hallucination: usize,
    pub irrelevant_correct: usize,
    pub irrelevant_incorrect: usize,
    /// RAG traces lacking a correctness or relevance grade; not counted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ungraded: Vec<String>,
}

impl TaxonomyCounts {
    /// Builds counts from published category totals, deriving the
    /// relevant-and-correct cell as `relevant - hallucination`.
    pub fn from_categories(
        relevant: usize,
        hallucination: usize,
        irrelevant_correct: usize,
        irrelevant_incorrect: usize,
    ) -> Result<Self, EvalError> {
        if hallucination > relevant {
            return Err(EvalError::InvalidGrade(format!(
                "{hallucination} hallucinations exceed {relevant} relevant answers"
            )));
        }
        Ok(Self {
            relevant_correct: relevant - hallucination,
            hallucination,
            irrelevant_correct,
            irrelevant_incorrect,
            ungraded: Vec::new(),
        })
    }

    pub fn relevant(&self) -> usize {
        self.relevant_correct + self.hallucination
    }

    pub fn total(&self) -> usize {
        self.relevant() + self.irrelevant_correct + self.irrelevant_incorrect
    }

    /// Rows in display order: label and count.
    pub fn rows(&self) -> [(&'static str, usize); 5] {
        [
            ("Context relevant", self.relevant()),
            ("Context relevant, response correct", self.relevant_correct),
            (
                "Context relevant, response incorrect (hallucination)",
                self.hallucination,
            ),
            (
                "Context irrelevant, response correct",
                self.irrelevant_correct,
            ),
            (
                "Context irrelevant, response incorrect",
                self.irrelevant_incorrect,
            ),
        ]
    }

    pub fn render(&self) -> String {
        let n = self.total();
        self.rows()
            .iter()
            .map(|(label, count)| format!("{label}: {}", format_share(*count, n)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// `100·count/n` rounded to an integer, exact halves rounded down.
pub fn rounded_percent(count: usize, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let scaled = 100 * count;
    let (q, r) = (scaled / n, scaled % n);
    if 2 * r > n {
        q + 1
    } else {
        q
    }
}

/// `"6% (5/80)"`.
pub fn format_share(count: usize, n: usize) -> String {
    format!("{}% ({count}/{n})", rounded_percent(count, n))
}

/// Partitions graded RAG traces into the four categories. Conventional
/// traces are ignored; a RAG trace missing either grade is listed in
/// `ungraded` with a warning.
pub fn taxonomy_report(grades: &[GradeRecord], traces: &[AnswerTrace]) -> TaxonomyCounts {
    let by_trace: HashMap<&str, &GradeRecord> =
        grades.iter().map(|g| (g.trace_id.as_str(), g)).collect();
    let mut counts = TaxonomyCounts::default();
    for t in traces.iter().filter(|t| t.mode == AnswerMode::Rag) {
        match by_trace
            .get(t.trace_id.as_str())
            .and_then(|g| Some((g.correct, g.context_relevant?)))
        {
            Some((1, 1)) => counts.relevant_correct += 1,
            Some((_, 1)) => counts.hallucination += 1,
            Some((1, _)) => counts.irrelevant_correct += 1,
            Some(_) => counts.irrelevant_incorrect += 1,
            None => {
                tracing::warn!(trace_id = %t.trace_id, "rag trace lacks a relevance grade; excluded from taxonomy");
                counts.ungraded.push(t.trace_id.clone());
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_category_counts() {
        let c = TaxonomyCounts::from_categories(58, 5, 10, 12).unwrap();
        assert_eq!(c.relevant_correct, 53);
        assert_eq!(c.total(), 80);
        assert_eq!(format_share(c.hallucination, 80), "6% (5/80)");
        assert_eq!(format_share(c.irrelevant_correct, 80), "12% (10/80)");
        assert_eq!(format_share(c.irrelevant_incorrect, 80), "15% (12/80)");
        assert_eq!(format_share(c.relevant(), 80), "72% (58/80)");
        assert!(TaxonomyCounts::from_categories(4, 5, 0, 0).is_err());
    }

    #[test]
    fn rounding_is_half_down() {
        assert_eq!(rounded_percent(10, 80), 12);
        assert_eq!(rounded_percent(5, 80), 6);
        assert_eq!(rounded_percent(1, 3), 33);
        assert_eq!(rounded_percent(2, 3), 67);
        assert_eq!(rounded_percent(1, 8), 12);
        assert_eq!(rounded_percent(3, 8), 37);
        assert_eq!(rounded_percent(0, 0), 0);
    }

    #[test]
    fn empty_grades_give_zero_counts() {
        let c = taxonomy_report(&[], &[]);
        assert_eq!(c, TaxonomyCounts::default());
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn render_lists_every_row() {
        let text = TaxonomyCounts::from_categories(2, 1, 1, 0)
            .unwrap()
            .render();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("(hallucination): 33% (1/3)"));
    }
}
