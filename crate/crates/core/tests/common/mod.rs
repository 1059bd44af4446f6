#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde::Deserialize;
use webrag_core::dataset::{load_dataset, Dataset, DatasetFormat};
use webrag_core::gateway::BackendProfile;
use webrag_core::offline::{OfflineStack, ANSWER_PROFILE};
use webrag_core::pipeline::{AnswerMode, AnswerTrace, TraceStore, TRACES_FILE};

pub fn fixture(rel: &str) -> PathBuf {
    webrag_core::fixtures_dir().join(rel)
}

pub fn extendedqa() -> Dataset {
    load_dataset(&fixture("datasets/extendedqa.jsonl"), DatasetFormat::Jsonl).unwrap()
}

pub struct GoldenRun {
    pub traces: Vec<AnswerTrace>,
    pub traces_jsonl: String,
}

/// ExtendedQA × {rag, conventional} on the bundled offline stack, persisted
/// through a trace store under `dir`.
pub async fn golden_run(dir: &Path) -> GoldenRun {
    let stack = OfflineStack::bundled().unwrap();
    let pipeline = stack.pipeline(stack.config()).unwrap();
    let store = TraceStore::open(dir).unwrap();
    let traces = pipeline
        .run_batch(
            &extendedqa(),
            &[AnswerMode::Rag, AnswerMode::Conventional],
            &[BackendProfile::scripted(ANSWER_PROFILE)],
            Some(&store),
        )
        .await
        .unwrap();
    let traces_jsonl = std::fs::read_to_string(dir.join(TRACES_FILE)).unwrap();
    GoldenRun {
        traces,
        traces_jsonl,
    }
}

#[derive(Debug, Deserialize)]
pub struct ExpectedItem {
    pub item_id: String,
    pub rag_correct: u8,
    pub rag_context_relevant: u8,
    pub conventional_correct: u8,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedGrades {
    pub items: Vec<ExpectedItem>,
}

pub fn expected_grades() -> ExpectedGrades {
    serde_json::from_str(
        &std::fs::read_to_string(fixture("golden/extendedqa_expected_grades.json")).unwrap(),
    )
    .unwrap()
}

/// Writes `actual` to the golden file when `WEBRAG_UPDATE_GOLDEN` is set,
/// otherwise returns the committed contents.
pub fn golden_file(rel: &str, actual: &str) -> String {
    let path = fixture(rel);
    if std::env::var_os("WEBRAG_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    std::fs::read_to_string(&path).unwrap_or_default()
}
