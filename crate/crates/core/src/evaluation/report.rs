use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::stats::{
    accuracy, bh_fdr, bootstrap_summary, paired_bootstrap_test, BootstrapSummary, ScoreVector,
};
use super::taxonomy::{format_share, taxonomy_report, TaxonomyCounts};
use super::{latest_grades, EvalError, GradeRecord, StatsConfig};
use crate::dataset::Dataset;
use crate::pipeline::{AnswerMode, AnswerTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub mode: AnswerMode,
    pub profile: String,
    pub n: usize,
    pub correct: usize,
    /// Sample accuracy, correct / n.
    pub accuracy: f64,
    pub bootstrap: BootstrapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspecialtyCell {
    pub condition: String,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspecialtyRow {
    pub subspecialty: String,
    pub n: usize,
    pub cells: Vec<SubspecialtyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTaxonomy {
    pub condition: String,
    pub counts: TaxonomyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n_items: usize,
    pub stats: StatsConfig,
    pub conditions: Vec<ConditionSummary>,
    /// Every pair of conditions, FDR-adjusted together.
    pub comparisons: Vec<Comparison>,
    /// Items count under every tag they carry, so rows overlap.
    pub subspecialties: Vec<SubspecialtyRow>,
    /// RAG conditions only.
    pub taxonomy: Vec<ConditionTaxonomy>,
}

/// One line of the JSONL report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportLine {
    Meta {
        dataset: String,
        n_items: usize,
        stats: StatsConfig,
    },
    Condition(ConditionSummary),
    Comparison(Comparison),
    Subspecialty(SubspecialtyRow),
    Taxonomy(ConditionTaxonomy),
}

pub fn condition_name(mode: AnswerMode, profile: &str) -> String {
    match mode {
        AnswerMode::Rag => format!("rag+{profile}"),
        AnswerMode::Conventional => profile.to_string(),
    }
}

/// Assembles the full report. Every trace of every condition over the
/// dataset's items must be graded; otherwise the ungraded trace ids are
/// returned as the error.
pub fn build_report(
    dataset: &Dataset,
    grades: &[GradeRecord],
    traces: &[AnswerTrace],
    cfg: &StatsConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let grades = latest_grades(grades);
    let grade_by_id: HashMap<&str, &GradeRecord> =
        grades.iter().map(|g| (g.trace_id.as_str(), g)).collect();

    // conditions in order of first appearance
    let mut keys: Vec<(AnswerMode, String)> = Vec::new();
    let mut by_key: HashMap<(AnswerMode, String), HashMap<&str, &AnswerTrace>> = HashMap::new();
    for t in traces {
        let Some(item_id) = t.item_id.as_deref().filter(|id| dataset.get(id).is_some()) else {
            continue;
        };
        let key = (t.mode, t.profile.clone());
        if !by_key.contains_key(&key) {
            keys.push(key.clone());
        }
        by_key.entry(key).or_default().insert(item_id, t);
    }

    let item_ids: Vec<String> = dataset.items.iter().map(|i| i.id.clone()).collect();
    let mut ungraded = Vec::new();
    let mut vectors = Vec::new();
    let mut condition_traces = Vec::new();
    for key in &keys {
        let name = condition_name(key.0, &key.1);
        let per_item = &by_key[key];
        let missing: Vec<String> = item_ids
            .iter()
            .filter(|id| !per_item.contains_key(id.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(EvalError::MissingTraces {
                condition: name,
                items: missing,
            });
        }
        let mut scores = Vec::with_capacity(item_ids.len());
        let mut ordered = Vec::with_capacity(item_ids.len());
        for id in &item_ids {
            let t = per_item[id.as_str()];
            match grade_by_id.get(t.trace_id.as_str()) {
                Some(g) => scores.push(g.correct),
                None => ungraded.push(t.trace_id.clone()),
            }
            ordered.push(t.clone());
        }
        vectors.push((key.clone(), name, scores));
        condition_traces.push(ordered);
    }
    if !ungraded.is_empty() {
        return Err(EvalError::Ungraded(ungraded));
    }

    let mut conditions = Vec::new();
    let mut score_vectors = Vec::new();
    for ((mode, profile), name, scores) in vectors {
        let sv = ScoreVector::new(name.clone(), item_ids.clone(), scores)?;
        conditions.push(ConditionSummary {
            condition: name,
            mode,
            profile,
            n: sv.len(),
            correct: sv.correct(),
            accuracy: accuracy(&sv)?,
            bootstrap: bootstrap_summary(&sv, cfg)?,
        });
        score_vectors.push(sv);
    }

    let mut comparisons = Vec::new();
    for i in 0..score_vectors.len() {
        for j in i + 1..score_vectors.len() {
            comparisons.push(Comparison {
                a: score_vectors[i].condition_name.clone(),
                b: score_vectors[j].condition_name.clone(),
                p_value: paired_bootstrap_test(&score_vectors[i], &score_vectors[j], cfg)?,
                p_adjusted: 0.0,
                significant: false,
            });
        }
    }
    let p: Vec<f64> = comparisons.iter().map(|c| c.p_value).collect();
    let fdr = bh_fdr(&p, cfg.alpha)?;
    for (c, (adj, rej)) in comparisons
        .iter_mut()
        .zip(fdr.adjusted.into_iter().zip(fdr.rejected))
    {
        c.p_adjusted = adj;
        c.significant = rej;
    }

    let subspecialties = dataset
        .subspecialties()
        .into_iter()
        .map(|tag| {
            let idx: Vec<usize> = dataset
                .items
                .iter()
                .enumerate()
                .filter(|(_, item)| item.has_subspecialty(&tag))
                .map(|(i, _)| i)
                .collect();
            let cells = score_vectors
                .iter()
                .map(|sv| {
                    let correct: usize = idx.iter().map(|&i| sv.scores[i] as usize).sum();
                    SubspecialtyCell {
                        condition: sv.condition_name.clone(),
                        correct,
                        accuracy: if idx.is_empty() {
                            0.0
                        } else {
                            correct as f64 / idx.len() as f64
                        },
                    }
                })
                .collect();
            SubspecialtyRow {
                subspecialty: tag,
                n: idx.len(),
                cells,
            }
        })
        .collect();

    let taxonomy = conditions
        .iter()
        .zip(&condition_traces)
        .filter(|(c, _)| c.mode == AnswerMode::Rag)
        .map(|(c, traces)| ConditionTaxonomy {
            condition: c.condition.clone(),
            counts: taxonomy_report(&grades, traces),
        })
        .collect();

    Ok(EvalReport {
        dataset: dataset.name.clone(),
        n_items: dataset.len(),
        stats: *cfg,
        conditions,
        comparisons,
        subspecialties,
        taxonomy,
    })
}

fn pct(x: f64) -> f64 {
    (x * 100.0).round()
}

/// `"74 ± 5 [95% CI: 64, 84] (59/80)"`, from the sample accuracy and the
/// bootstrap sd and interval.
pub fn format_accuracy(summary: &ConditionSummary, ci_level: f64) -> String {
    let b = &summary.bootstrap;
    format!(
        "{} ± {} [{}% CI: {}, {}] ({}/{})",
        pct(summary.accuracy),
        pct(b.sd),
        pct(ci_level),
        pct(b.ci_low),
        pct(b.ci_high),
        summary.correct,
        summary.n
    )
}

impl EvalReport {
    pub fn lines(&self) -> Vec<ReportLine> {
        let mut out = vec![ReportLine::Meta {
            dataset: self.dataset.clone(),
            n_items: self.n_items,
            stats: self.stats,
        }];
        out.extend(self.conditions.iter().cloned().map(ReportLine::Condition));
        out.extend(self.comparisons.iter().cloned().map(ReportLine::Comparison));
        out.extend(
            self.subspecialties
                .iter()
                .cloned()
                .map(ReportLine::Subspecialty),
        );
        out.extend(self.taxonomy.iter().cloned().map(ReportLine::Taxonomy));
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.lines()
            .iter()
            .map(|l| serde_json::to_string(l).expect("report lines serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EvalError> {
        let mut report: Option<EvalReport> = None;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let parsed: ReportLine =
                serde_json::from_str(line).map_err(|e| EvalError::MalformedReport {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            let missing_meta = || EvalError::MalformedReport {
                line: i + 1,
                message: "first line must be the meta record".into(),
            };
            match parsed {
                ReportLine::Meta {
                    dataset,
                    n_items,
                    stats,
                } => {
                    report = Some(EvalReport {
                        dataset,
                        n_items,
                        stats,
                        conditions: Vec::new(),
                        comparisons: Vec::new(),
                        subspecialties: Vec::new(),
                        taxonomy: Vec::new(),
                    })
                }
                ReportLine::Condition(c) => {
                    report.as_mut().ok_or_else(missing_meta)?.conditions.push(c)
                }
                ReportLine::Comparison(c) => report
                    .as_mut()
                    .ok_or_else(missing_meta)?
                    .comparisons
                    .push(c),
                ReportLine::Subspecialty(s) => report
                    .as_mut()
                    .ok_or_else(missing_meta)?
                    .subspecialties
                    .push(s),
                ReportLine::Taxonomy(t) => {
                    report.as_mut().ok_or_else(missing_meta)?.taxonomy.push(t)
                }
            }
        }
        report.ok_or(EvalError::MalformedReport {
            line: 0,
            message: "empty report".into(),
        })
    }

    /// Plain-text tables: accuracy per condition, pairwise tests,
    /// per-subspecialty accuracy and the relevance taxonomy.
    pub fn render_text(&self) -> String {
        let width = self
            .conditions
            .iter()
            .map(|c| c.condition.len())
            .max()
            .unwrap_or(9)
            .max(9);
        let mut out = format!("Dataset: {} (n = {})\n\n", self.dataset, self.n_items);
        out.push_str(&format!(
            "{:<width$}  Accuracy (mean ± SD [CI]) (correct/n)\n",
            "Condition"
        ));
        for c in &self.conditions {
            out.push_str(&format!(
                "{:<width$}  {}\n",
                c.condition,
                format_accuracy(c, self.stats.ci_level)
            ));
        }
        if !self.comparisons.is_empty() {
            out.push_str(&format!(
                "\nPaired bootstrap comparisons ({} redraws, seed {}, FDR < {})\n",
                self.stats.n_resamples, self.stats.seed, self.stats.alpha
            ));
            for c in &self.comparisons {
                out.push_str(&format!(
                    "{} vs {}: p = {:.3}, adjusted p = {:.3}{}\n",
                    c.a,
                    c.b,
                    c.p_value,
                    c.p_adjusted,
                    if c.significant { " *" } else { "" }
                ));
            }
        }
        if !self.subspecialties.is_empty() {
            out.push_str("\nAccuracy by subspecialty\n");
            for row in &self.subspecialties {
                let cells: Vec<String> = row
                    .cells
                    .iter()
                    .map(|c| format!("{} {}", c.condition, format_share(c.correct, row.n)))
                    .collect();
                out.push_str(&format!(
                    "{} (n = {}): {}\n",
                    row.subspecialty,
                    row.n,
                    cells.join("; ")
                ));
            }
        }
        for t in &self.taxonomy {
            out.push_str(&format!(
                "\nContext relevance: {}\n{}\n",
                t.condition,
                t.counts.render()
            ));
            if !t.counts.ungraded.is_empty() {
                out.push_str(&format!(
                    "({} trace(s) lack a relevance grade)\n",
                    t.counts.ungraded.len()
                ));
            }
        }
        out
    }
}
