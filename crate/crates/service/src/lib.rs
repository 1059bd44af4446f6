//! HTTP service and operator CLI around the webrag engine. Owns the run
//! directory: traces, grades, manifests and reports.

pub mod api;
pub mod config;
pub mod engine;
pub mod idempotency;
pub mod store;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use webrag_core::dataset::load_dataset;
use webrag_core::evaluation::{EvalError, GradeRecord};
use webrag_core::pipeline::{AnswerMode, AnswerTrace, PipelineError, Question, TraceStatus};
use webrag_core::{Dataset, DatasetError, DatasetFormat};

pub use config::{ConfigError, Overrides, ServiceConfig};
pub use engine::Engine;
pub use store::{Condition, Location, Run, RunManifest, RunStatus, Workspace};

use idempotency::{IdempotencyLog, IDEMPOTENCY_FILE};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("startup failed: {0}")]
    Startup(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt state file: {0}")]
    Corrupt(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Invalid(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Named datasets: the bundled fixtures plus any from configuration.
#[derive(Debug, Clone, Default)]
pub struct DatasetCatalog {
    paths: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n_items: usize,
    pub subspecialties: Vec<String>,
}

impl DatasetCatalog {
    pub fn from_config(cfg: &ServiceConfig) -> Self {
        let mut paths = BTreeMap::new();
        let bundled = webrag_core::fixtures_dir().join("datasets");
        if let Ok(entries) = std::fs::read_dir(&bundled) {
            for e in entries.flatten() {
                let p = e.path();
                if p.extension().is_some_and(|x| x == "jsonl") {
                    if let Some(stem) = p.file_stem() {
                        paths.insert(stem.to_string_lossy().into_owned(), p);
                    }
                }
            }
        }
        paths.extend(cfg.datasets.clone());
        Self { paths }
    }

    pub fn names(&self) -> Vec<String> {
        self.paths.keys().cloned().collect()
    }

    /// A catalog name, a name with `.jsonl`, or a path to a JSONL file.
    pub fn load(&self, name_or_path: &str) -> Result<Dataset, ServiceError> {
        let key = name_or_path.strip_suffix(".jsonl").unwrap_or(name_or_path);
        let path = Path::new(name_or_path);
        let mut ds = if path.is_file() {
            load_dataset(path, DatasetFormat::Jsonl)?
        } else if let Some(p) = self.paths.get(key) {
            load_dataset(p, DatasetFormat::Jsonl)?
        } else {
            return Err(ServiceError::NotFound(format!(
                "dataset {name_or_path:?}; known: {}",
                self.names().join(", ")
            )));
        };
        if self.paths.contains_key(key) && !path.is_file() {
            ds.name = key.to_string();
        }
        Ok(ds)
    }

    pub fn describe(&self) -> Result<Vec<DatasetInfo>, ServiceError> {
        self.names()
            .iter()
            .map(|n| {
                let ds = self.load(n)?;
                Ok(DatasetInfo {
                    name: n.clone(),
                    n_items: ds.len(),
                    subspecialties: ds.subspecialties(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub url: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRef {
    pub url: String,
    pub title: String,
    pub score: f64,
    pub text: String,
}

/// What `POST /v1/ask` and `webrag ask` report for one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub trace_id: String,
    pub mode: AnswerMode,
    pub profile: String,
    pub status: TraceStatus,
    pub answer: String,
    pub sources: Vec<SourceRef>,
    pub context: Vec<ContextRef>,
    pub keyphrases: Vec<String>,
    pub stage_timings_ms: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&AnswerTrace> for AskResponse {
    fn from(t: &AnswerTrace) -> Self {
        let title_of = |url: &url::Url| {
            t.context_chunks
                .iter()
                .map(|c| &c.chunk.article_ref)
                .find(|a| &a.url == url)
                .map(|a| a.title.clone())
                .unwrap_or_default()
        };
        Self {
            trace_id: t.trace_id.clone(),
            mode: t.mode,
            profile: t.profile.clone(),
            status: t.status,
            answer: t.answer.clone(),
            sources: t
                .sources()
                .iter()
                .map(|u| SourceRef {
                    url: u.to_string(),
                    title: title_of(u),
                })
                .collect(),
            context: t
                .context_chunks
                .iter()
                .map(|c| ContextRef {
                    url: c.chunk.article_ref.url.to_string(),
                    title: c.chunk.article_ref.title.clone(),
                    score: c.score,
                    text: c.chunk.text.clone(),
                })
                .collect(),
            keyphrases: t.keyphrases.clone(),
            stage_timings_ms: t.stage_timings_ms.clone(),
            warnings: t.warnings.clone(),
            degraded: t.degraded,
            error: t.error.clone(),
        }
    }
}

/// Everything a running service or CLI command needs.
#[derive(Debug)]
pub struct App {
    pub config: ServiceConfig,
    pub engine: Engine,
    pub workspace: Workspace,
    pub idempotency: IdempotencyLog,
    pub datasets: DatasetCatalog,
}

impl App {
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let engine = Engine::from_config(&config)?;
        let workspace = Workspace::open(&config.service.data_dir)?;
        let idempotency = IdempotencyLog::open(config.service.data_dir.join(IDEMPOTENCY_FILE))?;
        let datasets = DatasetCatalog::from_config(&config);
        Ok(Arc::new(Self {
            config,
            engine,
            workspace,
            idempotency,
            datasets,
        }))
    }

    /// Answers one question and stores the trace before returning it.
    pub async fn ask(
        &self,
        question: &str,
        mode: AnswerMode,
        profile: Option<&str>,
    ) -> Result<AnswerTrace, ServiceError> {
        let profile = self.engine.answer_profile(profile)?;
        let q = Question::raw(question);
        let pipeline = self.engine.pipeline();
        let trace = match mode {
            AnswerMode::Rag => pipeline.answer_with_rag(&q, &profile).await?,
            AnswerMode::Conventional => pipeline.answer_conventional(&q, &profile).await?,
        };
        self.workspace.ask().traces.append(&trace)?;
        Ok(trace)
    }

    /// Registers a run of `dataset` over modes × profiles.
    pub fn create_run(
        &self,
        run_id: Option<String>,
        dataset: &str,
        modes: &[AnswerMode],
        profiles: &[String],
    ) -> Result<Arc<Run>, ServiceError> {
        let dataset = self.datasets.load(dataset)?;
        if modes.is_empty() {
            return Err(ServiceError::Invalid(
                "at least one mode is required".into(),
            ));
        }
        let profiles = if profiles.is_empty() {
            vec![self.engine.answer_profile(None)?.name]
        } else {
            profiles.to_vec()
        };
        let mut seen = HashSet::new();
        let mut conditions = Vec::new();
        for &mode in modes {
            for p in &profiles {
                self.engine.answer_profile(Some(p))?;
                if seen.insert((mode, p.clone())) {
                    conditions.push(Condition {
                        mode,
                        profile: p.clone(),
                    });
                }
            }
        }
        let id = run_id.unwrap_or_else(|| store::new_run_id(chrono::Utc::now()));
        self.workspace.create_run(
            id,
            dataset,
            conditions,
            self.engine.pipeline().fingerprint().to_string(),
        )
    }

    /// Runs (or resumes) a batch; traces already completed are reused.
    pub async fn execute_run(&self, run: &Run) -> Result<Vec<AnswerTrace>, ServiceError> {
        let manifest = run.manifest();
        if manifest.config_fingerprint != self.engine.pipeline().fingerprint() {
            let msg = format!(
                "run {} was created with configuration {}; current configuration is {}",
                manifest.run_id,
                manifest.config_fingerprint,
                self.engine.pipeline().fingerprint()
            );
            return Err(ServiceError::Conflict(msg));
        }
        let profiles = manifest
            .profile_names()
            .iter()
            .map(|p| self.engine.answer_profile(Some(p)))
            .collect::<Result<Vec<_>, _>>()?;
        run.set_status(RunStatus::Running, None)?;
        let result = self
            .engine
            .pipeline()
            .run_batch(
                run.dataset(),
                &manifest.modes(),
                &profiles,
                Some(&run.traces),
            )
            .await;
        match result {
            Ok(traces) => {
                run.set_status(RunStatus::Complete, None)?;
                Ok(traces)
            }
            Err(e) => {
                run.set_status(RunStatus::Failed, Some(e.to_string()))?;
                Err(e.into())
            }
        }
    }

    /// Validates every grade against its stored trace, then appends them.
    /// With `run_id`, traces are looked up in that run only. Nothing is
    /// written unless all records pass.
    pub fn submit_grades(
        &self,
        run_id: Option<&str>,
        grades: &[GradeRecord],
    ) -> Result<Vec<Location>, ServiceError> {
        if grades.is_empty() {
            return Err(ServiceError::Invalid("no grade records submitted".into()));
        }
        let run = match run_id {
            Some(id) => Some(
                self.workspace
                    .run(id)
                    .ok_or_else(|| ServiceError::NotFound(format!("run {id}")))?,
            ),
            None => None,
        };
        let mut groups: Vec<(Location, Vec<GradeRecord>)> = Vec::new();
        let mut unknown = Vec::new();
        for g in grades {
            g.validate()?;
            let found = match &run {
                Some(r) => r
                    .traces
                    .get(&g.trace_id)
                    .map(|t| vec![(Location::Run(r.id()), t)])
                    .unwrap_or_default(),
                None => self.workspace.find_trace(&g.trace_id),
            };
            let (at, trace) = match found.len() {
                0 => {
                    unknown.push(g.trace_id.clone());
                    continue;
                }
                1 => found.into_iter().next().expect("one match"),
                _ => {
                    return Err(ServiceError::Invalid(format!(
                        "trace {} is stored in several places; pass run_id",
                        g.trace_id
                    )))
                }
            };
            g.validate_against(&trace)?;
            match groups.iter_mut().find(|(l, _)| *l == at) {
                Some((_, v)) => v.push(g.clone()),
                None => groups.push((at, vec![g.clone()])),
            }
        }
        if !unknown.is_empty() {
            return Err(ServiceError::NotFound(format!(
                "trace(s) {}",
                unknown.join(", ")
            )));
        }
        for (at, gs) in &groups {
            self.workspace.append_grades(at, gs)?;
        }
        Ok(groups.into_iter().map(|(l, _)| l).collect())
    }
}
