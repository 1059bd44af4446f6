//! The fully offline stack: fixture corpus, scripted chat backends, the
//! local hash embedder and a manual clock. Runs on it are byte-reproducible.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::browser::{ArticleSource, Browser, BrowserError, FixtureSource};
use crate::clock::ManualClock;
use crate::gateway::{BackendProfile, Gateway, GatewayError, RetryPolicy, ScriptedChat};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError};

pub const KEYPHRASE_PROFILE: &str = "fixture-keyphrases";
pub const ANSWER_PROFILE: &str = "fixture-answers";
pub const EMBEDDING_PROFILE: &str = "hash-embedder";

#[derive(Debug, thiserror::Error)]
pub enum OfflineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Browser(#[from] BrowserError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone)]
pub struct OfflinePaths {
    pub corpus_dir: PathBuf,
    pub keyphrase_script: PathBuf,
    pub answer_script: PathBuf,
}

impl OfflinePaths {
    /// Standard layout under a fixtures directory.
    pub fn under(fixtures: &Path) -> Self {
        Self {
            corpus_dir: fixtures.join("corpus"),
            keyphrase_script: fixtures.join("scripts").join("keyphrases.json"),
            answer_script: fixtures.join("scripts").join("answers.json"),
        }
    }
}

pub struct OfflineStack {
    pub gateway: Arc<Gateway>,
    pub source: Arc<FixtureSource>,
    pub browser: Arc<Browser>,
}

impl OfflineStack {
    pub fn load(paths: &OfflinePaths) -> Result<Self, OfflineError> {
        let gateway = Gateway::with_clock(RetryPolicy::default(), Arc::new(ManualClock::fixed()))
            .with_journal();
        gateway.register_script(
            KEYPHRASE_PROFILE,
            ScriptedChat::from_path(&paths.keyphrase_script)?,
        );
        gateway.register_script(
            ANSWER_PROFILE,
            ScriptedChat::from_path(&paths.answer_script)?,
        );
        let source = Arc::new(FixtureSource::from_dir(&paths.corpus_dir)?);
        let browser = Arc::new(Browser::new(source.clone()).with_clock(gateway.clock()));
        Ok(Self {
            gateway: Arc::new(gateway),
            source,
            browser,
        })
    }

    /// The crate's own fixtures.
    pub fn bundled() -> Result<Self, OfflineError> {
        Self::load(&OfflinePaths::under(&crate::fixtures_dir()))
    }

    pub fn config(&self) -> PipelineConfig {
        PipelineConfig::new(
            BackendProfile::scripted(ANSWER_PROFILE),
            BackendProfile::scripted(KEYPHRASE_PROFILE),
            BackendProfile::local_embedder(EMBEDDING_PROFILE),
            self.source.name(),
        )
    }

    pub fn pipeline(&self, config: PipelineConfig) -> Result<Pipeline, OfflineError> {
        Ok(Pipeline::new(
            self.gateway.clone(),
            self.browser.clone(),
            config,
        )?)
    }
}
