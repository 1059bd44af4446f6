//! QA datasets: one question per record with a reference answer and
//! subspecialty tags, stored as line-delimited JSON.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid record: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatientSex {
    Female,
    Male,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
    #[serde(default)]
    pub subspecialties: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_age_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_sex: Option<PatientSex>,
}

impl QaItem {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id must be non-empty".into());
        }
        if self.question.trim().is_empty() {
            return Err("question must be non-empty".into());
        }
        if self.reference_answer.trim().is_empty() {
            return Err("reference_answer must be non-empty".into());
        }
        if self.subspecialties.iter().any(|t| t.trim().is_empty()) {
            return Err("subspecialties must not contain empty strings".into());
        }
        if let Some(age) = self.patient_age_years {
            if !age.is_finite() || age < 0.0 {
                return Err(format!("patient_age_years must be non-negative, got {age}"));
            }
        }
        Ok(())
    }

    pub fn has_subspecialty(&self, tag: &str) -> bool {
        let wanted = tag.to_lowercase();
        self.subspecialties
            .iter()
            .any(|t| t.to_lowercase() == wanted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<QaItem>,
}

impl Dataset {
    /// Builds a dataset from already-constructed items, enforcing the same
    /// invariants as [`load_dataset`]. Line numbers in errors are 1-based
    /// item positions.
    pub fn new(name: impl Into<String>, items: Vec<QaItem>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for (i, item) in items.iter().enumerate() {
            item.validate().map_err(|message| DatasetError::Invalid {
                line: i + 1,
                message,
            })?;
            if !seen.insert(item.id.clone()) {
                return Err(DatasetError::DuplicateId {
                    line: i + 1,
                    id: item.id.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            items,
        })
    }

    pub fn parse_jsonl(name: impl Into<String>, text: &str) -> Result<Self, DatasetError> {
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let item: QaItem = serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
                line,
                message: e.to_string(),
            })?;
            item.validate()
                .map_err(|message| DatasetError::Invalid { line, message })?;
            if !seen.insert(item.id.clone()) {
                return Err(DatasetError::DuplicateId { line, id: item.id });
            }
            items.push(item);
        }
        Ok(Self {
            name: name.into(),
            items,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("QaItem serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        file.sync_all()
    }

    pub fn get(&self, id: &str) -> Option<&QaItem> {
        self.items.iter().find(|item| item.id == id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Every distinct tag, in first-seen order. Case variants collapse onto
    /// the first spelling seen.
    pub fn subspecialties(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut tags = Vec::new();
        for tag in self.items.iter().flat_map(|item| &item.subspecialties) {
            if seen.insert(tag.to_lowercase()) {
                tags.push(tag.clone());
            }
        }
        tags
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let DatasetFormat::Jsonl = format;
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::parse_jsonl(name, &text)
}

/// Items tagged with `subspecialty` (case-insensitive exact match), in
/// dataset order. `None` returns the dataset unchanged.
pub fn stratify(dataset: &Dataset, subspecialty: Option<&str>) -> Dataset {
    match subspecialty {
        None => dataset.clone(),
        Some(tag) => Dataset {
            name: format!("{}[{}]", dataset.name, tag),
            items: dataset
                .items
                .iter()
                .filter(|item| item.has_subspecialty(tag))
                .cloned()
                .collect(),
        },
    }
}
