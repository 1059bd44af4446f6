//! Builds the pipeline from configuration: live web source and remote
//! backends, or the offline fixture stack.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use webrag_core::browser::{ArticleCache, ArticleSource, Browser, FixtureSource, WebSource};
use webrag_core::gateway::ScriptedChat;
use webrag_core::offline::{OfflinePaths, OfflineStack, ANSWER_PROFILE};
use webrag_core::pipeline::{Pipeline, PipelineConfig};
use webrag_core::{BackendProfile, Gateway, SystemClock};

use crate::config::{ServiceConfig, SourceKind};
use crate::ServiceError;

/// Offline alias for the scripted answer backend.
pub const MOCK_PROFILE: &str = "mock";
pub const ECHO_PROFILE: &str = "echo";

pub struct Engine {
    gateway: Arc<Gateway>,
    pipeline: Arc<Pipeline>,
    /// Profiles that may answer questions, by name.
    profiles: BTreeMap<String, BackendProfile>,
    offline: bool,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("offline", &self.offline)
            .field("profiles", &self.profiles.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        if cfg.service.offline {
            Self::offline(cfg)
        } else {
            Self::online(cfg)
        }
    }

    fn offline(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let fixtures = cfg
            .offline
            .fixtures_dir
            .clone()
            .unwrap_or_else(webrag_core::fixtures_dir);
        let paths = OfflinePaths::under(&fixtures);
        let stack = OfflineStack::load(&paths).map_err(|e| ServiceError::Startup(e.to_string()))?;
        let answers = ScriptedChat::from_path(&paths.answer_script)
            .map_err(|e| ServiceError::Startup(e.to_string()))?;
        stack.gateway.register_script(MOCK_PROFILE, answers);

        let profiles: BTreeMap<_, _> = [
            BackendProfile::scripted(ANSWER_PROFILE),
            BackendProfile::scripted(MOCK_PROFILE),
            BackendProfile::echo(ECHO_PROFILE),
        ]
        .into_iter()
        .map(|p| (p.name.clone(), p))
        .collect();
        let mut config = stack.config();
        apply_pipeline_section(&mut config, cfg);
        if let Some(p) = profiles.get(&cfg.pipeline.answer_profile) {
            config.answer_profile = p.clone();
        }
        let pipeline = stack
            .pipeline(config)
            .map_err(|e| ServiceError::Startup(e.to_string()))?;
        Ok(Self {
            gateway: stack.gateway.clone(),
            pipeline: Arc::new(pipeline),
            profiles,
            offline: true,
        })
    }

    fn online(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let startup = |e: &dyn std::fmt::Display| ServiceError::Startup(e.to_string());
        let profile = |name: &str| -> Result<BackendProfile, ServiceError> {
            cfg.profiles
                .get(name)
                .ok_or_else(|| ServiceError::Startup(format!("undefined profile {name:?}")))?
                .backend_profile(name)
                .map_err(|e| startup(&e))
        };
        let profiles = cfg
            .profiles
            .keys()
            .map(|name| Ok((name.clone(), profile(name)?)))
            .collect::<Result<BTreeMap<_, _>, ServiceError>>()?;

        let gateway = Arc::new(Gateway::new(cfg.gateway.retry_policy()));
        let clock = gateway.clock();
        let source: Arc<dyn ArticleSource> = match cfg.source.kind {
            SourceKind::Web => {
                let web = cfg.source.web_config().map_err(|e| startup(&e))?;
                Arc::new(WebSource::with_clock(web, clock.clone()).map_err(|e| startup(&e))?)
            }
            SourceKind::Fixture => {
                let dir: PathBuf = cfg.source.fixture_dir.clone().unwrap_or_default();
                Arc::new(FixtureSource::from_dir(&dir).map_err(|e| startup(&e))?)
            }
        };
        let mut browser = Browser::new(source.clone()).with_clock(clock);
        if cfg.source.kind == SourceKind::Web {
            let cache = ArticleCache::open(
                &cfg.cache_dir(),
                Duration::from_secs(cfg.source.cache_ttl_hours * 3600),
                Arc::new(SystemClock::new()),
            )
            .map_err(|e| startup(&e))?;
            browser = browser.with_cache(Arc::new(cache));
        }
        let mut config = PipelineConfig::new(
            profile(&cfg.pipeline.answer_profile)?,
            profile(&cfg.pipeline.keyphrase_profile)?,
            profile(&cfg.pipeline.embedding_profile)?,
            source.name(),
        );
        apply_pipeline_section(&mut config, cfg);
        let pipeline =
            Pipeline::new(gateway.clone(), Arc::new(browser), config).map_err(|e| startup(&e))?;
        Ok(Self {
            gateway,
            pipeline: Arc::new(pipeline),
            profiles,
            offline: false,
        })
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn pipeline(&self) -> &Arc<Pipeline> {
        &self.pipeline
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    pub fn profile_names(&self) -> Vec<String> {
        self.profiles.keys().cloned().collect()
    }

    /// The named profile, or the configured answer profile for `None`.
    pub fn answer_profile(&self, name: Option<&str>) -> Result<BackendProfile, ServiceError> {
        match name {
            None => Ok(self.pipeline.config().answer_profile.clone()),
            Some(n) => self.profiles.get(n).cloned().ok_or_else(|| {
                ServiceError::Invalid(format!(
                    "unknown profile {n:?}; available: {}",
                    self.profile_names().join(", ")
                ))
            }),
        }
    }
}

fn apply_pipeline_section(config: &mut PipelineConfig, cfg: &ServiceConfig) {
    let p = &cfg.pipeline;
    config.max_keyphrases = p.max_keyphrases;
    config.articles_per_phrase = p.articles_per_phrase;
    config.chunking = cfg.chunking();
    config.retrieval_k = p.retrieval_k;
    config.item_concurrency = p.item_concurrency;
}
