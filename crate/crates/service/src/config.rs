//! Service configuration: a TOML file, then `WEBRAG__SECTION__KEY`
//! environment overrides, then command-line overrides.
//!
//! API keys never appear here. A profile names the environment variable
//! that holds its key (`auth_env`); unknown keys such as `api_key` are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use webrag_core::browser::{WebSourceConfig, DEFAULT_USER_AGENT};
use webrag_core::evaluation::StatsConfig;
use webrag_core::gateway::RetryPolicy;
use webrag_core::index::ChunkingParams;
use webrag_core::BackendProfile;

pub const ENV_PREFIX: &str = "WEBRAG__";
pub const DEFAULT_BIND: &str = "127.0.0.1:8750";
pub const DEFAULT_CONSOLE_ORIGIN: &str = "http://localhost:5173";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("bad override {key:?}: {message}")]
    Override { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub service: ServiceSection,
    pub pipeline: PipelineSection,
    pub gateway: GatewaySection,
    pub source: SourceSection,
    pub stats: StatsSection,
    pub offline: OfflineSection,
    pub profiles: BTreeMap<String, ProfileSection>,
    /// Dataset name to JSONL path.
    pub datasets: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    pub data_dir: PathBuf,
    pub cors_origins: Vec<String>,
    /// Fixture corpus and scripted backends instead of the web and remote models.
    pub offline: bool,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            data_dir: PathBuf::from("webrag-data"),
            cors_origins: vec![DEFAULT_CONSOLE_ORIGIN.into()],
            offline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub answer_profile: String,
    pub keyphrase_profile: String,
    pub embedding_profile: String,
    pub max_keyphrases: usize,
    pub articles_per_phrase: usize,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub retrieval_k: usize,
    pub item_concurrency: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let chunking = ChunkingParams::default();
        Self {
            answer_profile: "gpt-4-turbo".into(),
            keyphrase_profile: "gpt-3.5-turbo".into(),
            embedding_profile: "text-embedding".into(),
            max_keyphrases: webrag_core::browser::MAX_KEYPHRASES,
            articles_per_phrase: webrag_core::browser::DEFAULT_ARTICLES_PER_PHRASE,
            chunk_size: chunking.chunk_size,
            chunk_overlap: chunking.overlap,
            retrieval_k: webrag_core::index::DEFAULT_TOP_K,
            item_concurrency: webrag_core::pipeline::DEFAULT_ITEM_CONCURRENCY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: u32,
    pub request_timeout_ms: u64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let p = RetryPolicy::default();
        Self {
            max_attempts: p.max_attempts,
            initial_backoff_ms: p.initial_backoff_ms,
            backoff_multiplier: p.multiplier,
            request_timeout_ms: p.request_timeout_ms,
        }
    }
}

impl GatewaySection {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            initial_backoff_ms: self.initial_backoff_ms,
            multiplier: self.backoff_multiplier,
            request_timeout_ms: self.request_timeout_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Web,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub name: String,
    pub base_url: String,
    pub search_path: String,
    pub search_params: BTreeMap<String, String>,
    pub article_path_prefix: String,
    pub user_agent: String,
    pub allowed_hosts: Vec<String>,
    pub rate_limit_ms: u64,
    pub timeout_ms: u64,
    /// Article cache; defaults to `<data_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub cache_ttl_hours: u64,
    /// Corpus directory when `kind = "fixture"`.
    pub fixture_dir: Option<PathBuf>,
}

impl Default for SourceSection {
    fn default() -> Self {
        let web = WebSourceConfig::radiopaedia();
        Self {
            kind: SourceKind::Web,
            name: web.name,
            base_url: web.base_url.to_string(),
            search_path: web.search_path,
            search_params: web.search_params.into_iter().collect(),
            article_path_prefix: web.article_path_prefix,
            user_agent: DEFAULT_USER_AGENT.into(),
            allowed_hosts: web.allowed_hosts,
            rate_limit_ms: web.rate_limit_ms,
            timeout_ms: web.timeout_ms,
            cache_dir: None,
            cache_ttl_hours: 24,
            fixture_dir: None,
        }
    }
}

impl SourceSection {
    pub fn web_config(&self) -> Result<WebSourceConfig, ConfigError> {
        let base_url = url::Url::parse(&self.base_url)
            .map_err(|e| ConfigError::Invalid(format!("source.base_url: {e}")))?;
        Ok(WebSourceConfig {
            name: self.name.clone(),
            base_url,
            search_path: self.search_path.clone(),
            search_params: self
                .search_params
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            article_path_prefix: self.article_path_prefix.clone(),
            user_agent: self.user_agent.clone(),
            allowed_hosts: self.allowed_hosts.clone(),
            rate_limit_ms: self.rate_limit_ms,
            timeout_ms: self.timeout_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub n_resamples: usize,
    pub ci_level: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for StatsSection {
    fn default() -> Self {
        let s = StatsConfig::default();
        Self {
            n_resamples: s.n_resamples,
            ci_level: s.ci_level,
            alpha: s.alpha,
            seed: s.seed,
        }
    }
}

impl StatsSection {
    pub fn stats_config(&self) -> StatsConfig {
        StatsConfig {
            n_resamples: self.n_resamples,
            ci_level: self.ci_level,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineSection {
    /// Fixtures root (corpus/, scripts/); defaults to the bundled fixtures.
    pub fixtures_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub endpoint: String,
    pub model_id: String,
    #[serde(default)]
    pub min_temperature: f64,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent_requests: usize,
}

fn default_max_concurrent() -> usize {
    webrag_core::gateway::DEFAULT_MAX_CONCURRENT_REQUESTS
}

impl ProfileSection {
    pub fn backend_profile(&self, name: &str) -> Result<BackendProfile, ConfigError> {
        let mut p = BackendProfile::new(name, &self.endpoint, &self.model_id)
            .map_err(|e| ConfigError::Invalid(format!("profiles.{name}: {e}")))?
            .with_min_temperature(self.min_temperature);
        p.auth_ref = self.auth_env.clone();
        p.max_concurrent_requests = self.max_concurrent_requests;
        p.validate()
            .map_err(|e| ConfigError::Invalid(format!("profiles.{name}: {e}")))?;
        Ok(p)
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let mut profiles = BTreeMap::new();
        for (name, model, floor) in [
            ("gpt-4-turbo", "gpt-4-turbo", 0.1),
            ("gpt-3.5-turbo", "gpt-3.5-turbo", 0.1),
        ] {
            profiles.insert(
                name.to_string(),
                ProfileSection {
                    endpoint: "https://api.openai.com/v1".into(),
                    model_id: model.into(),
                    min_temperature: floor,
                    auth_env: Some("OPENAI_API_KEY".into()),
                    max_concurrent_requests: default_max_concurrent(),
                },
            );
        }
        profiles.insert(
            "text-embedding".into(),
            ProfileSection {
                endpoint: "https://api.openai.com/v1".into(),
                model_id: "text-embedding-3-small".into(),
                min_temperature: 0.0,
                auth_env: Some("OPENAI_API_KEY".into()),
                max_concurrent_requests: default_max_concurrent(),
            },
        );
        Self {
            service: ServiceSection::default(),
            pipeline: PipelineSection::default(),
            gateway: GatewaySection::default(),
            source: SourceSection::default(),
            stats: StatsSection::default(),
            offline: OfflineSection::default(),
            profiles,
            datasets: BTreeMap::new(),
        }
    }
}

/// Command-line settings that take precedence over file and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub offline: bool,
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub bind: Option<String>,
    /// Extra `section.key=value` assignments.
    pub set: Vec<String>,
}

impl ServiceConfig {
    /// Reads `path` (or starts from defaults), applies `WEBRAG__*`
    /// variables from `env`, then `overrides`. Relative paths in the file
    /// resolve against the file's directory.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &Overrides,
    ) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.display().to_string(),
                    source,
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError::Parse {
                        path: p.display().to_string(),
                        message: e.to_string(),
                    })?
            }
            None => toml::Table::new(),
        };
        let mut env: Vec<_> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        env.sort();
        for (key, value) in env {
            let dotted = key[ENV_PREFIX.len()..].to_lowercase().replace("__", ".");
            assign(&mut table, &dotted, &value).map_err(|message| ConfigError::Override {
                key: key.clone(),
                message,
            })?;
        }
        for kv in &overrides.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Override {
                key: kv.clone(),
                message: "expected key=value".into(),
            })?;
            assign(&mut table, k.trim(), v.trim()).map_err(|message| ConfigError::Override {
                key: kv.clone(),
                message,
            })?;
        }
        let origin = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
        let mut cfg: ServiceConfig =
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Parse {
                    path: origin,
                    message: e.to_string(),
                })?;
        if let Some(dir) = path.and_then(Path::parent) {
            cfg.resolve_relative(dir);
        }
        if overrides.offline {
            cfg.service.offline = true;
        }
        if let Some(seed) = overrides.seed {
            cfg.stats.seed = seed;
        }
        if let Some(d) = &overrides.data_dir {
            cfg.service.data_dir = d.clone();
        }
        if let Some(b) = &overrides.bind {
            cfg.service.bind = b.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.service.data_dir);
        for p in self.datasets.values_mut() {
            fix(p);
        }
        for p in [
            &mut self.source.cache_dir,
            &mut self.source.fixture_dir,
            &mut self.offline.fixtures_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.stats_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("stats: {e}")))?;
        self.chunking()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("pipeline: {e}")))?;
        if self.service.bind.trim().is_empty() {
            return Err(ConfigError::Invalid("service.bind is empty".into()));
        }
        if self.gateway.max_attempts == 0 {
            return Err(ConfigError::Invalid(
                "gateway.max_attempts must be at least 1".into(),
            ));
        }
        if !self.service.offline {
            for name in [
                &self.pipeline.answer_profile,
                &self.pipeline.keyphrase_profile,
                &self.pipeline.embedding_profile,
            ] {
                if !self.profiles.contains_key(name) {
                    return Err(ConfigError::Invalid(format!(
                        "pipeline refers to undefined profile {name:?}"
                    )));
                }
            }
            for (name, p) in &self.profiles {
                p.backend_profile(name)?;
            }
            if self.source.kind == SourceKind::Fixture && self.source.fixture_dir.is_none() {
                return Err(ConfigError::Invalid(
                    "source.kind = \"fixture\" needs source.fixture_dir".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn stats_config(&self) -> StatsConfig {
        self.stats.stats_config()
    }

    pub fn chunking(&self) -> ChunkingParams {
        ChunkingParams {
            chunk_size: self.pipeline.chunk_size,
            overlap: self.pipeline.chunk_overlap,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.source
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.service.data_dir.join("cache"))
    }
}

/// Sets `a.b.c` in `table`. The value is read as a TOML literal when it
/// parses as one, otherwise kept as a string.
fn assign(table: &mut toml::Table, dotted: &str, raw: &str) -> Result<(), String> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err("empty key segment".into());
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, path) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in path {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| format!("{p} is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
