//! Question answering end to end: key-phrases, article gathering, the
//! ephemeral index and the answer call (RAG mode), or the bare question
//! (conventional mode). Every run produces an [`AnswerTrace`].

mod prompt;
mod store;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use crate::browser::{
    default_keyphrase_examples, extract_keyphrases, ArticleRef, Browser, KEYPHRASE_SYSTEM_PROMPT,
    MAX_KEYPHRASES,
};
use crate::clock::Clock;
use crate::dataset::{Dataset, QaItem};
use crate::gateway::{BackendProfile, CallRecord, ChatRequest, FewShotExample, Gateway};
use crate::index::{
    build_index, chunk_article, ChunkingParams, ScoredChunk, WordPunctTokenizer, DEFAULT_TOP_K,
};

pub use prompt::{
    conventional_prompt, rag_prompt, PromptPreset, CONVENTIONAL_INSTRUCTION,
    CONVENTIONAL_INSTRUCTION_ASSISTANT, NO_CONTEXT_PLACEHOLDER, RAG_INSTRUCTION,
    RAG_INSTRUCTION_ASSISTANT,
};
pub use store::{TraceIndexEntry, TraceStore, TRACES_FILE, TRACE_INDEX_FILE};

pub const STAGE_KEYPHRASES: &str = "keyphrase_extraction";
pub const STAGE_SEARCH: &str = "source_search";
pub const STAGE_INDEX: &str = "index_build";
pub const STAGE_ANSWER: &str = "llm_answer";
pub const RAG_STAGES: [&str; 4] = [STAGE_KEYPHRASES, STAGE_SEARCH, STAGE_INDEX, STAGE_ANSWER];

pub const DEFAULT_ITEM_CONCURRENCY: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trace store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    Rag,
    Conventional,
}

impl AnswerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rag => "rag",
            Self::Conventional => "conventional",
        }
    }
}

impl std::fmt::Display for AnswerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AnswerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rag" => Ok(Self::Rag),
            "conventional" => Ok(Self::Conventional),
            other => Err(format!(
                "unknown mode {other:?} (expected rag or conventional)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    Failed,
}

/// A prompt exactly as it went to the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentPrompt {
    pub stage: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub trace_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    pub question: String,
    pub mode: AnswerMode,
    pub profile: String,
    pub status: TraceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// RAG ran without usable key-phrases or context.
    #[serde(default)]
    pub degraded: bool,
    pub keyphrases: Vec<String>,
    pub articles: Vec<ArticleRef>,
    pub context_chunks: Vec<ScoredChunk>,
    pub prompts: Vec<SentPrompt>,
    pub answer: String,
    pub stage_timings_ms: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Chat calls made for this trace (key-phrase and answer).
    pub llm_calls: Vec<CallRecord>,
    pub created_at: DateTime<Utc>,
}

impl AnswerTrace {
    /// Source URLs of the context chunks, first occurrence order.
    pub fn sources(&self) -> Vec<Url> {
        let mut out: Vec<Url> = Vec::new();
        for c in &self.context_chunks {
            if !out.contains(&c.chunk.article_ref.url) {
                out.push(c.chunk.article_ref.url.clone());
            }
        }
        out
    }

    pub fn is_completed(&self) -> bool {
        self.status == TraceStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub item_id: Option<String>,
    pub text: String,
}

impl Question {
    pub fn raw(text: impl Into<String>) -> Self {
        Self {
            item_id: None,
            text: text.into(),
        }
    }
}

impl From<&QaItem> for Question {
    fn from(item: &QaItem) -> Self {
        Self {
            item_id: Some(item.id.clone()),
            text: item.question.clone(),
        }
    }
}

fn default_examples() -> Vec<FewShotExample> {
    default_keyphrase_examples()
}

fn default_concurrency() -> usize {
    DEFAULT_ITEM_CONCURRENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_keyphrases: usize,
    pub articles_per_phrase: usize,
    pub chunking: ChunkingParams,
    pub retrieval_k: usize,
    pub answer_profile: BackendProfile,
    pub keyphrase_profile: BackendProfile,
    pub embedding_profile: BackendProfile,
    /// Name of the article source; part of the fingerprint.
    pub source: String,
    #[serde(default)]
    pub prompt_preset: PromptPreset,
    #[serde(default = "default_examples")]
    pub keyphrase_examples: Vec<FewShotExample>,
    #[serde(default = "default_concurrency")]
    pub item_concurrency: usize,
}

impl PipelineConfig {
    pub fn new(
        answer_profile: BackendProfile,
        keyphrase_profile: BackendProfile,
        embedding_profile: BackendProfile,
        source: impl Into<String>,
    ) -> Self {
        Self {
            max_keyphrases: MAX_KEYPHRASES,
            articles_per_phrase: crate::browser::DEFAULT_ARTICLES_PER_PHRASE,
            chunking: ChunkingParams::default(),
            retrieval_k: DEFAULT_TOP_K,
            answer_profile,
            keyphrase_profile,
            embedding_profile,
            source: source.into(),
            prompt_preset: PromptPreset::default(),
            keyphrase_examples: default_keyphrase_examples(),
            item_concurrency: DEFAULT_ITEM_CONCURRENCY,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(1..=MAX_KEYPHRASES).contains(&self.max_keyphrases) {
            return bad("max_keyphrases must be between 1 and 5");
        }
        if self.articles_per_phrase == 0 {
            return bad("articles_per_phrase must be at least 1");
        }
        if self.retrieval_k == 0 {
            return bad("retrieval_k must be at least 1");
        }
        if self.item_concurrency == 0 {
            return bad("item_concurrency must be at least 1");
        }
        self.chunking
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        for p in [
            &self.answer_profile,
            &self.keyphrase_profile,
            &self.embedding_profile,
        ] {
            p.validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Hash of every setting that changes what a trace contains, apart from
    /// the answering profile.
    pub fn fingerprint(&self) -> String {
        let value = serde_json::json!({
            "max_keyphrases": self.max_keyphrases,
            "articles_per_phrase": self.articles_per_phrase,
            "chunking": self.chunking,
            "retrieval_k": self.retrieval_k,
            "keyphrase_profile": self.keyphrase_profile,
            "embedding_profile": self.embedding_profile,
            "source": self.source,
            "prompt_preset": self.prompt_preset,
            "keyphrase_examples": self.keyphrase_examples,
        });
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Everything RAG mode computes before the answer call. Shared by all
/// answering profiles for one question.
#[derive(Debug, Clone, Default)]
pub struct PreparedContext {
    pub keyphrases: Vec<String>,
    pub articles: Vec<ArticleRef>,
    pub context_chunks: Vec<ScoredChunk>,
    pub degraded: bool,
    pub warnings: Vec<String>,
    pub timings_ms: BTreeMap<String, u64>,
    pub prompts: Vec<SentPrompt>,
    pub calls: Vec<CallRecord>,
    /// Set when a backend error makes every RAG answer for this question fail.
    pub failure: Option<String>,
}

pub struct Pipeline {
    gateway: Arc<Gateway>,
    browser: Arc<Browser>,
    config: PipelineConfig,
    clock: Arc<dyn Clock>,
    fingerprint: String,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("browser", &self.browser)
            .field("fingerprint", &self.fingerprint)
            .finish_non_exhaustive()
    }
}

fn millis(d: Duration) -> u64 {
    u64::try_from(d.as_millis()).unwrap_or(u64::MAX)
}

impl Pipeline {
    /// Timings and timestamps come from the gateway's clock.
    pub fn new(
        gateway: Arc<Gateway>,
        browser: Arc<Browser>,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let clock = gateway.clock();
        let fingerprint = config.fingerprint();
        Ok(Self {
            gateway,
            browser,
            config,
            clock,
            fingerprint,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn trace_id(&self, question: &Question, mode: AnswerMode, profile: &str) -> String {
        let mut h = Sha256::new();
        for part in [
            question.item_id.as_deref().unwrap_or(&question.text),
            mode.as_str(),
            profile,
            &self.fingerprint,
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        format!("tr-{}", hex::encode(&h.finalize()[..12]))
    }

    fn check_question(question: &Question) -> Result<(), PipelineError> {
        if question.text.trim().is_empty() {
            return Err(PipelineError::InvalidInput(
                "question must be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// Answers with the configured answer profile.
    pub async fn answer(
        &self,
        question: &Question,
        mode: AnswerMode,
    ) -> Result<AnswerTrace, PipelineError> {
        let profile = self.config.answer_profile.clone();
        match mode {
            AnswerMode::Rag => self.answer_with_rag(question, &profile).await,
            AnswerMode::Conventional => self.answer_conventional(question, &profile).await,
        }
    }

    pub async fn answer_with_rag(
        &self,
        question: &Question,
        profile: &BackendProfile,
    ) -> Result<AnswerTrace, PipelineError> {
        Self::check_question(question)?;
        let prepared = self.prepare_context(question).await?;
        Ok(self.finish_rag(question, profile, &prepared).await)
    }

    /// Key-phrases, article gathering, chunking, embedding and retrieval.
    ///
    /// Key-phrase failures and empty corpora degrade (no context); an
    /// embedding backend failure is recorded in `failure`.
    pub async fn prepare_context(
        &self,
        question: &Question,
    ) -> Result<PreparedContext, PipelineError> {
        Self::check_question(question)?;
        let mut prep = PreparedContext::default();
        let start = self.clock.elapsed();
        prep.prompts.push(SentPrompt {
            stage: STAGE_KEYPHRASES.into(),
            system: KEYPHRASE_SYSTEM_PROMPT.into(),
            user: question.text.clone(),
        });
        let keyphrases = match extract_keyphrases(
            &self.gateway,
            &self.config.keyphrase_profile,
            &question.text,
            question.item_id.clone(),
            &self.config.keyphrase_examples,
            self.config.max_keyphrases,
        )
        .await
        {
            Ok((set, call)) => {
                prep.calls.push(call);
                Some(set)
            }
            Err(e) => {
                prep.degraded = true;
                prep.warnings
                    .push(format!("key-phrase extraction failed: {e}"));
                None
            }
        };
        let t_kp = self.clock.elapsed();
        prep.timings_ms
            .insert(STAGE_KEYPHRASES.into(), millis(t_kp - start));

        let articles = match &keyphrases {
            Some(set) => {
                prep.keyphrases = set.phrases.clone();
                let gathered = self
                    .browser
                    .collect_articles(set, self.config.articles_per_phrase)
                    .await;
                prep.warnings.extend(gathered.warnings);
                gathered.articles
            }
            None => Vec::new(),
        };
        prep.articles = articles.iter().map(|a| a.article.clone()).collect();
        let t_search = self.clock.elapsed();
        prep.timings_ms
            .insert(STAGE_SEARCH.into(), millis(t_search - t_kp));

        let mut chunks = Vec::new();
        for a in &articles {
            chunks.extend(
                chunk_article(a, &WordPunctTokenizer, &self.config.chunking)
                    .map_err(|e| PipelineError::Config(e.to_string()))?,
            );
        }
        if chunks.is_empty() {
            prep.degraded = true;
            if keyphrases.is_some() {
                prep.warnings
                    .push("no article text available; answering without context".into());
            }
        } else {
            match self.retrieve(question, chunks).await {
                Ok(hits) => prep.context_chunks = hits,
                Err(e) => prep.failure = Some(format!("embedding failed: {e}")),
            }
        }
        prep.timings_ms
            .insert(STAGE_INDEX.into(), millis(self.clock.elapsed() - t_search));
        Ok(prep)
    }

    async fn retrieve(
        &self,
        question: &Question,
        chunks: Vec<crate::index::Chunk>,
    ) -> Result<Vec<ScoredChunk>, Box<dyn std::error::Error + Send + Sync>> {
        let (index, _) = build_index(&self.gateway, &self.config.embedding_profile, chunks).await?;
        let query = self
            .gateway
            .embed(
                &self.config.embedding_profile,
                std::slice::from_ref(&question.text),
            )
            .await?;
        let query = query
            .vectors
            .into_iter()
            .next()
            .ok_or("empty query embedding")?;
        Ok(index.top_k(&query, self.config.retrieval_k)?)
    }

    /// The answer call on top of a prepared context.
    pub async fn finish_rag(
        &self,
        question: &Question,
        profile: &BackendProfile,
        prep: &PreparedContext,
    ) -> AnswerTrace {
        let created_at = self.clock.now();
        let mut trace = AnswerTrace {
            trace_id: self.trace_id(question, AnswerMode::Rag, &profile.name),
            item_id: question.item_id.clone(),
            question: question.text.clone(),
            mode: AnswerMode::Rag,
            profile: profile.name.clone(),
            status: TraceStatus::Completed,
            error: None,
            degraded: prep.degraded,
            keyphrases: prep.keyphrases.clone(),
            articles: prep.articles.clone(),
            context_chunks: prep.context_chunks.clone(),
            prompts: prep.prompts.clone(),
            answer: String::new(),
            stage_timings_ms: prep.timings_ms.clone(),
            warnings: prep.warnings.clone(),
            llm_calls: prep.calls.clone(),
            created_at,
        };
        if let Some(failure) = &prep.failure {
            trace.status = TraceStatus::Failed;
            trace.error = Some(failure.clone());
            return trace;
        }
        let user = rag_prompt(
            self.config.prompt_preset,
            &question.text,
            &prep.context_chunks,
        );
        self.call_answer(&mut trace, profile, user).await;
        trace
    }

    pub async fn answer_conventional(
        &self,
        question: &Question,
        profile: &BackendProfile,
    ) -> Result<AnswerTrace, PipelineError> {
        Self::check_question(question)?;
        let mut trace = AnswerTrace {
            trace_id: self.trace_id(question, AnswerMode::Conventional, &profile.name),
            item_id: question.item_id.clone(),
            question: question.text.clone(),
            mode: AnswerMode::Conventional,
            profile: profile.name.clone(),
            status: TraceStatus::Completed,
            error: None,
            degraded: false,
            keyphrases: Vec::new(),
            articles: Vec::new(),
            context_chunks: Vec::new(),
            prompts: Vec::new(),
            answer: String::new(),
            stage_timings_ms: BTreeMap::new(),
            warnings: Vec::new(),
            llm_calls: Vec::new(),
            created_at: self.clock.now(),
        };
        let user = conventional_prompt(self.config.prompt_preset, &question.text);
        self.call_answer(&mut trace, profile, user).await;
        Ok(trace)
    }

    async fn call_answer(&self, trace: &mut AnswerTrace, profile: &BackendProfile, user: String) {
        trace.prompts.push(SentPrompt {
            stage: STAGE_ANSWER.into(),
            system: String::new(),
            user: user.clone(),
        });
        let start = self.clock.elapsed();
        match self
            .gateway
            .chat(profile, &ChatRequest::new("", user))
            .await
        {
            Ok(completion) => {
                trace.answer = completion.text;
                trace.llm_calls.push(completion.record);
            }
            Err(e) => {
                trace.status = TraceStatus::Failed;
                trace.error = Some(e.to_string());
            }
        }
        trace
            .stage_timings_ms
            .insert(STAGE_ANSWER.into(), millis(self.clock.elapsed() - start));
    }

    /// One trace per (item, mode, profile), in that nesting order.
    ///
    /// RAG context is prepared once per item and shared by all profiles.
    /// With a store, finished traces are appended item by item and
    /// completed traces already in the store are reused, not re-run.
    pub async fn run_batch(
        &self,
        dataset: &Dataset,
        modes: &[AnswerMode],
        profiles: &[BackendProfile],
        store: Option<&TraceStore>,
    ) -> Result<Vec<AnswerTrace>, PipelineError> {
        if dataset.is_empty() {
            return Err(PipelineError::InvalidInput("dataset is empty".into()));
        }
        if modes.is_empty() || profiles.is_empty() {
            return Err(PipelineError::InvalidInput(
                "need at least one mode and one profile".into(),
            ));
        }
        let mut names = std::collections::HashSet::new();
        for p in profiles {
            p.validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            if !names.insert(p.name.as_str()) {
                return Err(PipelineError::InvalidInput(format!(
                    "duplicate profile {:?}",
                    p.name
                )));
            }
        }
        let mut modes = modes.to_vec();
        modes.dedup();

        // futures built up front keep the stream Send for tokio::spawn
        let pending: Vec<_> = dataset
            .items
            .iter()
            .map(|item| self.run_item(item, &modes, profiles, store))
            .collect();
        let mut results = stream::iter(pending).buffered(self.config.item_concurrency);
        let mut all = Vec::with_capacity(dataset.len() * modes.len() * profiles.len());
        while let Some(item_traces) = results.next().await {
            for (trace, fresh) in item_traces? {
                if fresh {
                    if let Some(store) = store {
                        store.append(&trace)?;
                    }
                }
                all.push(trace);
            }
        }
        Ok(all)
    }

    async fn run_item(
        &self,
        item: &QaItem,
        modes: &[AnswerMode],
        profiles: &[BackendProfile],
        store: Option<&TraceStore>,
    ) -> Result<Vec<(AnswerTrace, bool)>, PipelineError> {
        let question = Question::from(item);
        let existing = |mode, p: &BackendProfile| {
            store
                .and_then(|s| s.get(&self.trace_id(&question, mode, &p.name)))
                .filter(AnswerTrace::is_completed)
        };
        let needs_context = modes.contains(&AnswerMode::Rag)
            && profiles
                .iter()
                .any(|p| existing(AnswerMode::Rag, p).is_none());
        let prepared = if needs_context {
            Some(self.prepare_context(&question).await?)
        } else {
            None
        };
        let mut out = Vec::new();
        for &mode in modes {
            for p in profiles {
                if let Some(done) = existing(mode, p) {
                    out.push((done, false));
                    continue;
                }
                let trace = match (mode, &prepared) {
                    (AnswerMode::Rag, Some(prep)) => self.finish_rag(&question, p, prep).await,
                    (AnswerMode::Rag, None) => {
                        unreachable!("context prepared whenever a rag trace is pending")
                    }
                    (AnswerMode::Conventional, _) => self.answer_conventional(&question, p).await?,
                };
                out.push((trace, true));
            }
        }
        Ok(out)
    }
}
