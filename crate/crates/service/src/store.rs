//! On-disk state under the data directory.
//!
//! ```text
//! <data_dir>/
//!   ask/{traces.jsonl, index.json, grades.jsonl}
//!   runs/<run_id>/{manifest.json, dataset.jsonl, traces.jsonl, index.json,
//!                  grades.jsonl, report.jsonl}
//!   idempotency.jsonl
//! ```
//!
//! Traces and grades are append-only and fsynced before a call returns.
//! Manifests and reports are rewritten atomically.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use webrag_core::evaluation::{build_report, latest_grades, EvalReport, GradeRecord, StatsConfig};
use webrag_core::pipeline::{AnswerMode, AnswerTrace, TraceStore};
use webrag_core::Dataset;

use crate::ServiceError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const GRADES_FILE: &str = "grades.jsonl";
pub const REPORT_FILE: &str = "report.jsonl";
pub const ASK_DIR: &str = "ask";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub mode: AnswerMode,
    pub profile: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub dataset: String,
    pub conditions: Vec<Condition>,
    pub config_fingerprint: String,
    pub status: RunStatus,
    pub done: usize,
    pub total: usize,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.done > self.total {
            return Err(ServiceError::Invalid(format!(
                "run {}: done {} exceeds total {}",
                self.run_id, self.done, self.total
            )));
        }
        Ok(())
    }

    pub fn modes(&self) -> Vec<AnswerMode> {
        let mut out = Vec::new();
        for c in &self.conditions {
            if !out.contains(&c.mode) {
                out.push(c.mode);
            }
        }
        out
    }

    pub fn profile_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.conditions {
            if !out.contains(&c.profile) {
                out.push(c.profile.clone());
            }
        }
        out
    }
}

/// Run ids become directory names.
pub fn check_run_id(id: &str) -> Result<(), ServiceError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Invalid(format!(
            "run id {id:?} must be 1-128 characters of [A-Za-z0-9._-] not starting with '.'"
        )))
    }
}

pub fn new_run_id(now: DateTime<Utc>) -> String {
    let suffix = uuid::Uuid::new_v4().simple().to_string();
    format!("run-{}-{}", now.format("%Y%m%dT%H%M%S"), &suffix[..8])
}

fn io_err(path: &Path, source: std::io::Error) -> ServiceError {
    ServiceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write to a temp file, fsync, rename over `path`, fsync the directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    if let Some(dir) = path.parent() {
        if let Ok(d) = std::fs::File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// Appends whole lines and fsyncs.
pub fn append_lines(path: &Path, lines: &[String]) -> Result<(), ServiceError> {
    let mut buf = String::new();
    for l in lines {
        buf.push_str(l);
        buf.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| io_err(path, e))?;
    f.sync_all().map_err(|e| io_err(path, e))
}

/// Reads a JSONL file, dropping a torn final line left by a crash.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ServiceError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut out = Vec::new();
    let mut good = 0;
    let mut lines = text.split_inclusive('\n').peekable();
    let mut n = 0;
    while let Some(line) = lines.next() {
        n += 1;
        let last = lines.peek().is_none();
        if line.trim().is_empty() {
            good += line.len();
            continue;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(v) => {
                out.push(v);
                good += line.len();
            }
            Err(_) if last && !line.ends_with('\n') => {
                tracing::warn!("dropping torn final line of {}", path.display());
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(|e| io_err(path, e))?;
                f.set_len(good as u64).map_err(|e| io_err(path, e))?;
                f.sync_all().map_err(|e| io_err(path, e))?;
            }
            Err(e) => {
                return Err(ServiceError::Corrupt(format!(
                    "{} line {n}: {e}",
                    path.display()
                )))
            }
        }
    }
    Ok(out)
}

/// Append-only grade file; later records for a trace supersede earlier ones.
#[derive(Debug)]
pub struct GradeLog {
    path: PathBuf,
    grades: Mutex<Vec<GradeRecord>>,
}

impl GradeLog {
    pub fn open(path: PathBuf) -> Result<Self, ServiceError> {
        let grades = read_jsonl(&path)?;
        Ok(Self {
            path,
            grades: Mutex::new(grades),
        })
    }

    pub fn append(&self, grades: &[GradeRecord]) -> Result<(), ServiceError> {
        let lines = grades
            .iter()
            .map(|g| serde_json::to_string(g).expect("grade serializes"))
            .collect::<Vec<_>>();
        let mut held = self.grades.lock().unwrap();
        append_lines(&self.path, &lines)?;
        held.extend_from_slice(grades);
        Ok(())
    }

    pub fn all(&self) -> Vec<GradeRecord> {
        self.grades.lock().unwrap().clone()
    }

    pub fn latest(&self) -> Vec<GradeRecord> {
        latest_grades(&self.all())
    }
}

/// Traces and grades for ad-hoc questions.
#[derive(Debug)]
pub struct AskLog {
    pub traces: TraceStore,
    pub grades: GradeLog,
}

#[derive(Debug)]
pub struct Run {
    dir: PathBuf,
    dataset: Dataset,
    manifest: Mutex<RunManifest>,
    pub traces: TraceStore,
    pub grades: GradeLog,
}

impl Run {
    fn create(dir: PathBuf, manifest: RunManifest, dataset: Dataset) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        write_atomic(&dir.join(DATASET_FILE), dataset.to_jsonl().as_bytes())?;
        write_atomic(
            &dir.join(MANIFEST_FILE),
            &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
        )?;
        Self::assemble(dir, manifest, dataset)
    }

    fn open(dir: PathBuf) -> Result<Self, ServiceError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        let manifest: RunManifest = serde_json::from_slice(&bytes)
            .map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))?;
        let ds_path = dir.join(DATASET_FILE);
        let text = std::fs::read_to_string(&ds_path).map_err(|e| io_err(&ds_path, e))?;
        let dataset = Dataset::parse_jsonl(manifest.dataset.clone(), &text)?;
        Self::assemble(dir, manifest, dataset)
    }

    fn assemble(
        dir: PathBuf,
        manifest: RunManifest,
        dataset: Dataset,
    ) -> Result<Self, ServiceError> {
        let traces = TraceStore::open(&dir)?;
        let grades = GradeLog::open(dir.join(GRADES_FILE))?;
        Ok(Self {
            dir,
            dataset,
            manifest: Mutex::new(manifest),
            traces,
            grades,
        })
    }

    pub fn id(&self) -> String {
        self.manifest.lock().unwrap().run_id.clone()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Current manifest with `done` counted from the trace log.
    pub fn manifest(&self) -> RunManifest {
        let mut m = self.manifest.lock().unwrap().clone();
        m.done = self.traces.len().min(m.total);
        m
    }

    pub fn set_status(&self, status: RunStatus, error: Option<String>) -> Result<(), ServiceError> {
        let mut m = self.manifest.lock().unwrap();
        m.status = status;
        m.error = error;
        m.done = self.traces.len().min(m.total);
        m.updated_at = Utc::now();
        write_atomic(
            &self.dir.join(MANIFEST_FILE),
            &serde_json::to_vec_pretty(&*m).expect("manifest serializes"),
        )
    }

    /// Builds the report from the latest grades and stores it as
    /// `report.jsonl`.
    pub fn report(&self, cfg: &StatsConfig) -> Result<EvalReport, ServiceError> {
        let report = build_report(
            &self.dataset,
            &self.grades.latest(),
            &self.traces.traces(),
            cfg,
        )?;
        write_atomic(&self.dir.join(REPORT_FILE), report.to_jsonl().as_bytes())?;
        Ok(report)
    }
}

/// Where a trace lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "run_id", rename_all = "snake_case")]
pub enum Location {
    Ask,
    Run(String),
}

#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    ask: AskLog,
    runs: RwLock<BTreeMap<String, Arc<Run>>>,
    /// Serializes run creation so two requests cannot claim one id.
    create_lock: Mutex<()>,
}

impl Workspace {
    /// Opens the data directory. Runs left `running` by a previous process
    /// are marked failed; `eval --resume` picks them up again.
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        let runs_dir = root.join(RUNS_DIR);
        std::fs::create_dir_all(&runs_dir).map_err(|e| io_err(&runs_dir, e))?;
        let ask_dir = root.join(ASK_DIR);
        let ask = AskLog {
            traces: TraceStore::open(&ask_dir)?,
            grades: GradeLog::open(ask_dir.join(GRADES_FILE))?,
        };
        let mut runs = BTreeMap::new();
        let entries = std::fs::read_dir(&runs_dir).map_err(|e| io_err(&runs_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&runs_dir, e))?;
            if !entry.path().join(MANIFEST_FILE).exists() {
                continue;
            }
            let run = Run::open(entry.path())?;
            if run.manifest().status == RunStatus::Running {
                run.set_status(
                    RunStatus::Failed,
                    Some("interrupted before completion".into()),
                )?;
            }
            runs.insert(run.id(), Arc::new(run));
        }
        Ok(Self {
            root: root.to_path_buf(),
            ask,
            runs: RwLock::new(runs),
            create_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ask(&self) -> &AskLog {
        &self.ask
    }

    pub fn create_run(
        &self,
        run_id: String,
        dataset: Dataset,
        conditions: Vec<Condition>,
        config_fingerprint: String,
    ) -> Result<Arc<Run>, ServiceError> {
        check_run_id(&run_id)?;
        if conditions.is_empty() {
            return Err(ServiceError::Invalid(
                "a run needs at least one condition".into(),
            ));
        }
        let _guard = self.create_lock.lock().unwrap();
        if self.run(&run_id).is_some() {
            return Err(ServiceError::Conflict(format!(
                "run {run_id} already exists"
            )));
        }
        let now = Utc::now();
        let manifest = RunManifest {
            run_id: run_id.clone(),
            dataset: dataset.name.clone(),
            total: dataset.len() * conditions.len(),
            conditions,
            config_fingerprint,
            status: RunStatus::Running,
            done: 0,
            created_at: now,
            updated_at: now,
            error: None,
        };
        manifest.validate()?;
        let run = Arc::new(Run::create(
            self.root.join(RUNS_DIR).join(&run_id),
            manifest,
            dataset,
        )?);
        self.runs.write().unwrap().insert(run_id, run.clone());
        Ok(run)
    }

    pub fn run(&self, id: &str) -> Option<Arc<Run>> {
        self.runs.read().unwrap().get(id).cloned()
    }

    pub fn runs(&self) -> Vec<Arc<Run>> {
        let mut runs: Vec<_> = self.runs.read().unwrap().values().cloned().collect();
        runs.sort_by_key(|r| (r.manifest().created_at, r.id()));
        runs
    }

    /// Every stored copy of a trace.
    pub fn find_trace(&self, trace_id: &str) -> Vec<(Location, AnswerTrace)> {
        let mut out = Vec::new();
        if let Some(t) = self.ask.traces.get(trace_id) {
            out.push((Location::Ask, t));
        }
        for run in self.runs() {
            if let Some(t) = run.traces.get(trace_id) {
                out.push((Location::Run(run.id()), t));
            }
        }
        out
    }

    pub fn append_grades(&self, at: &Location, grades: &[GradeRecord]) -> Result<(), ServiceError> {
        match at {
            Location::Ask => self.ask.grades.append(grades),
            Location::Run(id) => self
                .run(id)
                .ok_or_else(|| ServiceError::NotFound(format!("run {id}")))?
                .grades
                .append(grades),
        }
    }
}
