//! Uniform access to chat-completion and embedding backends.
//!
//! A [`BackendProfile`] names a backend by endpoint URL. The scheme selects
//! the implementation:
//!
//! | endpoint                    | backend                                   |
//! |-----------------------------|-------------------------------------------|
//! | `http(s)://…`               | OpenAI-compatible chat/embeddings API     |
//! | `mock://echo`               | echoes the user prompt behind a marker    |
//! | `mock://scripted`           | pattern → response table, echo fallback   |
//! | `mock://fail`               | always fails with a transport error       |
//! | `local://hash-embedder`     | feature-hashing embedder (`?dim=256`)     |
//!
//! Every call produces a [`CallRecord`] holding the exact outbound body and
//! the response text so pipeline traces can be audited.

mod embedder;
mod mock;
mod openai;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use url::Url;

use crate::clock::{Clock, SystemClock};

pub use embedder::{HashEmbedder, DEFAULT_EMBEDDING_DIM};
pub use mock::{ScriptRule, ScriptedChat, ECHO_MARKER};

pub const DEFAULT_MAX_CONCURRENT_REQUESTS: usize = 4;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error for profile {profile:?} after {attempts} attempt(s): {message}")]
    Transport {
        profile: String,
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid response from profile {profile:?}: {message}")]
    InvalidResponse { profile: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl SamplingParams {
    pub fn new(temperature: f64, top_p: f64) -> Result<Self, GatewayError> {
        let params = Self { temperature, top_p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be in [0, 2], got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

impl Default for SamplingParams {
    /// Greedy decoding: temperature 0, top-p 1.
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub user: String,
    pub assistant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub system_prompt: String,
    pub user_prompt: String,
    #[serde(default)]
    pub few_shot: Vec<FewShotExample>,
    #[serde(default)]
    pub sampling: SamplingParams,
}

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            few_shot: Vec::new(),
            sampling: SamplingParams::default(),
        }
    }

    pub fn with_few_shot(mut self, examples: Vec<FewShotExample>) -> Self {
        self.few_shot = examples;
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingParams) -> Self {
        self.sampling = sampling;
        self
    }
}

fn default_max_concurrent() -> usize {
    DEFAULT_MAX_CONCURRENT_REQUESTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendProfile {
    pub name: String,
    pub endpoint: Url,
    pub model_id: String,
    #[serde(default)]
    pub min_temperature: f64,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_ref: Option<String>,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent_requests: usize,
}

impl BackendProfile {
    pub fn new(
        name: impl Into<String>,
        endpoint: &str,
        model_id: impl Into<String>,
    ) -> Result<Self, GatewayError> {
        let endpoint = Url::parse(endpoint)
            .map_err(|e| GatewayError::Configuration(format!("bad endpoint {endpoint:?}: {e}")))?;
        let profile = Self {
            name: name.into(),
            endpoint,
            model_id: model_id.into(),
            min_temperature: 0.0,
            auth_ref: None,
            max_concurrent_requests: DEFAULT_MAX_CONCURRENT_REQUESTS,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn echo(name: impl Into<String>) -> Self {
        Self::new(name, "mock://echo", "echo").expect("static endpoint")
    }

    pub fn scripted(name: impl Into<String>) -> Self {
        Self::new(name, "mock://scripted", "scripted").expect("static endpoint")
    }

    pub fn failing(name: impl Into<String>) -> Self {
        Self::new(name, "mock://fail", "fail").expect("static endpoint")
    }

    pub fn local_embedder(name: impl Into<String>) -> Self {
        Self::new(name, "local://hash-embedder", "hash-embedder").expect("static endpoint")
    }

    pub fn with_min_temperature(mut self, min_temperature: f64) -> Self {
        self.min_temperature = min_temperature;
        self
    }

    pub fn with_auth_ref(mut self, var: impl Into<String>) -> Self {
        self.auth_ref = Some(var.into());
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.name.trim().is_empty() {
            return Err(GatewayError::Configuration(
                "profile name must be non-empty".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.min_temperature) {
            return Err(GatewayError::Configuration(format!(
                "profile {:?}: min_temperature must be in [0, 2]",
                self.name
            )));
        }
        if self.max_concurrent_requests == 0 {
            return Err(GatewayError::Configuration(format!(
                "profile {:?}: max_concurrent_requests must be positive",
                self.name
            )));
        }
        self.kind().map(|_| ())
    }

    /// Temperature actually sent: the requested value, raised to the
    /// profile's floor.
    pub fn effective_temperature(&self, requested: f64) -> f64 {
        requested.max(self.min_temperature)
    }

    pub fn is_offline(&self) -> bool {
        !matches!(self.kind(), Ok(BackendKind::Remote))
    }

    fn kind(&self) -> Result<BackendKind, GatewayError> {
        match (self.endpoint.scheme(), self.endpoint.host_str()) {
            ("http" | "https", _) => Ok(BackendKind::Remote),
            ("mock", Some("echo")) => Ok(BackendKind::Echo),
            ("mock", Some("scripted")) => Ok(BackendKind::Scripted),
            ("mock", Some("fail")) => Ok(BackendKind::Fail),
            ("local", Some("hash-embedder")) => {
                let dim = self
                    .endpoint
                    .query_pairs()
                    .find(|(k, _)| k == "dim")
                    .map(|(_, v)| v.parse::<usize>())
                    .transpose()
                    .map_err(|e| GatewayError::Configuration(format!("bad embedder dim: {e}")))?
                    .unwrap_or(DEFAULT_EMBEDDING_DIM);
                if dim == 0 {
                    return Err(GatewayError::Configuration(
                        "embedder dim must be positive".into(),
                    ));
                }
                Ok(BackendKind::HashEmbedder(dim))
            }
            _ => Err(GatewayError::Configuration(format!(
                "profile {:?}: unsupported endpoint {}",
                self.name, self.endpoint
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BackendKind {
    Remote,
    Echo,
    Scripted,
    Fail,
    HashEmbedder(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dimension: usize,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, GatewayError> {
        if values.is_empty() {
            return Err(GatewayError::InvalidRequest(
                "embedding must have positive dimension".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GatewayError::InvalidRequest(
                "embedding contains non-finite values".into(),
            ));
        }
        Ok(Self {
            dimension: values.len(),
            values,
        })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: u32,
    pub request_timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 500,
            multiplier: 2,
            request_timeout_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        // attempt is 1-based: delay after the first failure is the initial backoff
        let factor = u64::from(self.multiplier.max(1)).saturating_pow(attempt.saturating_sub(1));
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Chat,
    Embedding,
}

/// Audit record of one gateway call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub profile: String,
    pub kind: CallKind,
    pub endpoint: String,
    /// Outbound body in OpenAI-compatible wire form.
    pub request: serde_json::Value,
    /// Completion text for chat calls; a size summary for embedding calls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub attempts: u32,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub record: CallRecord,
}

#[derive(Debug, Clone)]
pub struct Embeddings {
    pub vectors: Vec<EmbeddingVector>,
    pub record: CallRecord,
}

/// Error from a single attempt, before retry classification.
#[derive(Debug)]
pub(crate) enum AttemptError {
    Retryable {
        status: Option<u16>,
        message: String,
    },
    Fatal {
        status: Option<u16>,
        message: String,
    },
    BadResponse(String),
}

pub struct Gateway {
    http: reqwest::Client,
    retry: RetryPolicy,
    clock: Arc<dyn Clock>,
    scripts: RwLock<HashMap<String, Arc<ScriptedChat>>>,
    limits: Mutex<HashMap<String, Arc<Semaphore>>>,
    journal: Mutex<Vec<CallRecord>>,
    journal_enabled: bool,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("retry", &self.retry)
            .field("journal_enabled", &self.journal_enabled)
            .finish_non_exhaustive()
    }
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new(RetryPolicy::default())
    }
}

impl Gateway {
    pub fn new(retry: RetryPolicy) -> Self {
        Self::with_clock(retry, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(retry: RetryPolicy, clock: Arc<dyn Clock>) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(retry.request_timeout_ms))
            .build()
            .expect("reqwest client builds with static config");
        Self {
            http,
            retry,
            clock,
            scripts: RwLock::new(HashMap::new()),
            limits: Mutex::new(HashMap::new()),
            journal: Mutex::new(Vec::new()),
            journal_enabled: false,
        }
    }

    /// Keep a copy of every [`CallRecord`] in memory, readable via
    /// [`Gateway::journal`].
    pub fn with_journal(mut self) -> Self {
        self.journal_enabled = true;
        self
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        Arc::clone(&self.clock)
    }

    /// Installs the response table used by the `mock://scripted` profile
    /// with this name.
    pub fn register_script(&self, profile_name: impl Into<String>, script: ScriptedChat) {
        self.scripts
            .write()
            .unwrap()
            .insert(profile_name.into(), Arc::new(script));
    }

    pub fn journal(&self) -> Vec<CallRecord> {
        self.journal.lock().unwrap().clone()
    }

    pub fn clear_journal(&self) {
        self.journal.lock().unwrap().clear();
    }

    fn log(&self, record: &CallRecord) {
        if self.journal_enabled {
            self.journal.lock().unwrap().push(record.clone());
        }
    }

    fn semaphore(&self, profile: &BackendProfile) -> Arc<Semaphore> {
        let mut limits = self.limits.lock().unwrap();
        Arc::clone(
            limits
                .entry(profile.name.clone())
                .or_insert_with(|| Arc::new(Semaphore::new(profile.max_concurrent_requests))),
        )
    }

    fn credential(&self, profile: &BackendProfile) -> Result<Option<String>, GatewayError> {
        match &profile.auth_ref {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(value) if !value.is_empty() => Ok(Some(value)),
                _ => Err(GatewayError::Configuration(format!(
                    "profile {:?}: credential variable {var} is not set",
                    profile.name
                ))),
            },
        }
    }

    pub async fn chat(
        &self,
        profile: &BackendProfile,
        req: &ChatRequest,
    ) -> Result<Completion, GatewayError> {
        if req.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(
                "user_prompt must be non-empty".into(),
            ));
        }
        req.sampling.validate()?;
        let kind = profile.kind()?;
        let temperature = profile.effective_temperature(req.sampling.temperature);
        let body = openai::chat_body(profile, req, temperature);
        let request = serde_json::to_value(&body).expect("chat body serializes");

        let _permit = self
            .semaphore(profile)
            .acquire_owned()
            .await
            .expect("semaphore never closed");
        let (result, attempts) = match kind {
            BackendKind::Echo => (Ok(format!("{ECHO_MARKER}{}", req.user_prompt)), 1),
            BackendKind::Scripted => {
                let script = self.scripts.read().unwrap().get(&profile.name).cloned();
                let text = match script {
                    Some(script) => script.respond(req),
                    None => format!("{ECHO_MARKER}{}", req.user_prompt),
                };
                (Ok(text), 1)
            }
            BackendKind::Fail => (
                Err(AttemptError::Retryable {
                    status: None,
                    message: "simulated backend failure".into(),
                }),
                1,
            ),
            BackendKind::HashEmbedder(_) => {
                return Err(GatewayError::Configuration(format!(
                    "profile {:?} is an embedding backend",
                    profile.name
                )))
            }
            BackendKind::Remote => {
                let key = self.credential(profile)?;
                let url = openai::endpoint_url(&profile.endpoint, "chat/completions");
                self.with_retries(|| openai::post_chat(&self.http, &url, key.as_deref(), &body))
                    .await
            }
        };

        let mut record = CallRecord {
            profile: profile.name.clone(),
            kind: CallKind::Chat,
            endpoint: profile.endpoint.to_string(),
            request,
            response: None,
            error: None,
            temperature: Some(temperature),
            attempts,
            at: self.clock.now(),
        };
        match result {
            Ok(text) => {
                record.response = Some(text.clone());
                self.log(&record);
                Ok(Completion { text, record })
            }
            Err(err) => {
                let err = classify(profile, attempts, err);
                record.error = Some(err.to_string());
                self.log(&record);
                Err(err)
            }
        }
    }

    pub async fn embed(
        &self,
        profile: &BackendProfile,
        texts: &[String],
    ) -> Result<Embeddings, GatewayError> {
        let kind = profile.kind()?;
        let request = serde_json::json!({ "model": profile.model_id, "input": texts });
        let mut record = CallRecord {
            profile: profile.name.clone(),
            kind: CallKind::Embedding,
            endpoint: profile.endpoint.to_string(),
            request,
            response: None,
            error: None,
            temperature: None,
            attempts: 0,
            at: self.clock.now(),
        };
        if texts.is_empty() {
            record.response = Some("0 vectors".into());
            return Ok(Embeddings {
                vectors: Vec::new(),
                record,
            });
        }

        let _permit = self
            .semaphore(profile)
            .acquire_owned()
            .await
            .expect("semaphore never closed");
        let (result, attempts) = match kind {
            BackendKind::HashEmbedder(dim) => {
                let embedder = HashEmbedder::new(dim);
                (Ok(texts.iter().map(|t| embedder.embed_raw(t)).collect()), 1)
            }
            BackendKind::Fail => (
                Err(AttemptError::Retryable {
                    status: None,
                    message: "simulated backend failure".into(),
                }),
                1,
            ),
            BackendKind::Echo | BackendKind::Scripted => {
                return Err(GatewayError::Configuration(format!(
                    "profile {:?} is a chat backend",
                    profile.name
                )))
            }
            BackendKind::Remote => {
                let key = self.credential(profile)?;
                let url = openai::endpoint_url(&profile.endpoint, "embeddings");
                let body = openai::EmbeddingBody {
                    model: &profile.model_id,
                    input: texts,
                };
                self.with_retries(|| {
                    openai::post_embeddings(&self.http, &url, key.as_deref(), &body)
                })
                .await
            }
        };
        record.attempts = attempts;

        let vectors = result.and_then(|raw: Vec<Vec<f64>>| {
            if raw.len() != texts.len() {
                return Err(AttemptError::BadResponse(format!(
                    "expected {} embeddings, got {}",
                    texts.len(),
                    raw.len()
                )));
            }
            let vectors = raw
                .into_iter()
                .map(EmbeddingVector::new)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| AttemptError::BadResponse(e.to_string()))?;
            if vectors.windows(2).any(|w| w[0].dimension != w[1].dimension) {
                return Err(AttemptError::BadResponse(
                    "embeddings differ in dimension".into(),
                ));
            }
            Ok(vectors)
        });
        match vectors {
            Ok(vectors) => {
                record.response = Some(format!(
                    "{} vectors x {} dims",
                    vectors.len(),
                    vectors[0].dimension
                ));
                self.log(&record);
                Ok(Embeddings { vectors, record })
            }
            Err(err) => {
                let err = classify(profile, attempts, err);
                record.error = Some(err.to_string());
                self.log(&record);
                Err(err)
            }
        }
    }

    async fn with_retries<T, F, Fut>(&self, mut attempt: F) -> (Result<T, AttemptError>, u32)
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<T, AttemptError>>,
    {
        let max = self.retry.max_attempts.max(1);
        let mut n = 0;
        loop {
            n += 1;
            match attempt().await {
                Ok(value) => return (Ok(value), n),
                Err(AttemptError::Retryable { status, message }) if n < max => {
                    let delay = self.retry.backoff(n);
                    tracing::warn!(
                        attempt = n,
                        ?status,
                        delay_ms = delay.as_millis() as u64,
                        "retrying: {message}"
                    );
                    self.clock.sleep_until(self.clock.elapsed() + delay).await;
                }
                Err(err) => return (Err(err), n),
            }
        }
    }
}

fn classify(profile: &BackendProfile, attempts: u32, err: AttemptError) -> GatewayError {
    match err {
        AttemptError::Retryable { status, message } | AttemptError::Fatal { status, message } => {
            GatewayError::Transport {
                profile: profile.name.clone(),
                attempts,
                status,
                message,
            }
        }
        AttemptError::BadResponse(message) => GatewayError::InvalidResponse {
            profile: profile.name.clone(),
            message,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rt() -> tokio::runtime::Runtime {
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap()
    }

    #[tokio::test]
    async fn echo_prefixes_marker() {
        let gw = Gateway::default();
        let out = gw
            .chat(
                &BackendProfile::echo("echo"),
                &ChatRequest::new("", "hello"),
            )
            .await
            .unwrap();
        assert_eq!(out.text, format!("{ECHO_MARKER}hello"));
    }

    #[tokio::test]
    async fn temperature_floor_is_applied() {
        let gw = Gateway::default();
        let profile = BackendProfile::echo("mixtral").with_min_temperature(0.1);
        let out = gw.chat(&profile, &ChatRequest::new("", "q")).await.unwrap();
        assert_eq!(out.record.temperature, Some(0.1));
        assert_eq!(out.record.request["temperature"], serde_json::json!(0.1));
        assert_eq!(out.record.request["top_p"], serde_json::json!(1.0));
    }

    #[tokio::test]
    async fn empty_prompt_and_bad_sampling_are_rejected() {
        let gw = Gateway::default();
        let p = BackendProfile::echo("e");
        assert!(matches!(
            gw.chat(&p, &ChatRequest::new("sys", "  ")).await,
            Err(GatewayError::InvalidRequest(_))
        ));
        let req = ChatRequest::new("", "q").with_sampling(SamplingParams {
            temperature: 0.0,
            top_p: 0.0,
        });
        assert!(gw.chat(&p, &req).await.is_err());
        assert!(SamplingParams::new(2.5, 1.0).is_err());
    }

    #[tokio::test]
    async fn missing_credential_is_a_configuration_error() {
        let gw = Gateway::default();
        let profile = BackendProfile::new("remote", "https://api.example.invalid/v1", "gpt")
            .unwrap()
            .with_auth_ref("WEBRAG_TEST_UNSET_CREDENTIAL_VAR");
        assert!(matches!(
            gw.chat(&profile, &ChatRequest::new("", "q")).await,
            Err(GatewayError::Configuration(_))
        ));
    }

    #[tokio::test]
    async fn unreachable_endpoint_fails_after_configured_attempts() {
        let retry = RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 5,
            multiplier: 2,
            request_timeout_ms: 2_000,
        };
        let gw = Gateway::new(retry).with_journal();
        let profile = BackendProfile::new("down", "http://127.0.0.1:9/v1", "m").unwrap();
        match gw.chat(&profile, &ChatRequest::new("", "q")).await {
            Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
        assert_eq!(gw.journal().len(), 1);
        assert!(gw.journal()[0].error.is_some());
    }

    #[test]
    fn backoff_is_exponential() {
        let r = RetryPolicy::default();
        assert_eq!(r.backoff(1), Duration::from_millis(500));
        assert_eq!(r.backoff(2), Duration::from_millis(1000));
        assert_eq!(r.backoff(3), Duration::from_millis(2000));
    }

    #[tokio::test]
    async fn embed_empty_is_empty() {
        let gw = Gateway::default();
        let out = gw
            .embed(&BackendProfile::local_embedder("local"), &[])
            .await
            .unwrap();
        assert!(out.vectors.is_empty());
    }

    #[tokio::test]
    async fn local_embedder_is_deterministic_and_unit_norm() {
        let gw = Gateway::default();
        let p = BackendProfile::local_embedder("local");
        let texts = vec!["liver mass".to_string()];
        let a = gw.embed(&p, &texts).await.unwrap().vectors;
        let b = gw.embed(&p, &texts).await.unwrap().vectors;
        assert_eq!(a, b);
        assert_eq!(a[0].dimension, DEFAULT_EMBEDDING_DIM);
        let norm: f64 = a[0].values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[tokio::test]
    async fn kind_mismatch_is_a_configuration_error() {
        let gw = Gateway::default();
        assert!(matches!(
            gw.embed(&BackendProfile::echo("e"), &["x".into()]).await,
            Err(GatewayError::Configuration(_))
        ));
        assert!(matches!(
            gw.chat(
                &BackendProfile::local_embedder("l"),
                &ChatRequest::new("", "x")
            )
            .await,
            Err(GatewayError::Configuration(_))
        ));
    }

    // building an HTTP client per case dominates runtime, so share one
    static JOURNALED: std::sync::LazyLock<Gateway> =
        std::sync::LazyLock::new(|| Gateway::default().with_journal());
    static SHARED: std::sync::LazyLock<Gateway> = std::sync::LazyLock::new(Gateway::default);

    proptest! {
        #[test]
        fn recorded_temperature_respects_floor(requested in 0.0f64..=2.0, floor in 0.0f64..=2.0) {
            let gw = &*JOURNALED;
            let profile = BackendProfile::echo("p").with_min_temperature(floor);
            let req = ChatRequest::new("", "q").with_sampling(SamplingParams { temperature: requested, top_p: 1.0 });
            rt().block_on(gw.chat(&profile, &req)).unwrap();
            let journal = gw.journal();
            prop_assert_eq!(journal.last().unwrap().temperature, Some(requested.max(floor)));
        }

        #[test]
        fn embed_preserves_length_and_order(texts in proptest::collection::vec("[a-z ]{0,24}", 0..12)) {
            let gw = &*SHARED;
            let p = BackendProfile::local_embedder("l");
            let all = rt().block_on(gw.embed(&p, &texts)).unwrap().vectors;
            prop_assert_eq!(all.len(), texts.len());
            for (i, text) in texts.iter().enumerate() {
                let one = rt().block_on(gw.embed(&p, std::slice::from_ref(text))).unwrap().vectors;
                prop_assert_eq!(&one[0], &all[i]);
            }
        }

        #[test]
        fn identical_mock_requests_give_identical_responses(prompt in "[a-zA-Z?][a-zA-Z ?]{0,40}") {
            let gw = &*SHARED;
            let p = BackendProfile::scripted("s");
            let req = ChatRequest::new("sys", prompt);
            let a = rt().block_on(gw.chat(&p, &req)).unwrap().text;
            let b = rt().block_on(gw.chat(&p, &req)).unwrap().text;
            prop_assert_eq!(a, b);
        }
    }
}
