//! Query-time article gathering: key-phrase extraction, source search,
//! article fetching with HTML cleaning, caching and per-host politeness.

mod cache;
mod extract;
mod fixture;
mod keyphrase;
mod ratelimit;
mod web;

use std::sync::Arc;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::clock::{Clock, SystemClock};
use crate::gateway::{BackendProfile, CallRecord, Gateway, GatewayError};

pub use cache::{ArticleCache, DEFAULT_CACHE_TTL};
pub use extract::extract_main_text;
pub use fixture::{FixtureArticle, FixtureSource};
pub use keyphrase::{
    default_keyphrase_examples, extract_keyphrases, keyphrase_request, parse_keyphrases,
    KEYPHRASE_SYSTEM_PROMPT,
};
pub use ratelimit::{RateLimiter, DEFAULT_RATE_LIMIT};
pub use web::{WebSource, WebSourceConfig, DEFAULT_USER_AGENT};

pub const MAX_KEYPHRASES: usize = 5;
pub const DEFAULT_ARTICLES_PER_PHRASE: usize = 5;
pub const DEFAULT_FETCH_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BrowserError {
    #[error("question must be non-empty")]
    EmptyQuestion,
    #[error("no key-phrases could be parsed from completion {completion:?}")]
    NoKeyphrases { completion: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("search limit must be at least 1")]
    InvalidLimit,
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("fetching {url} returned HTTP {status}")]
    Http { url: String, status: u16 },
    #[error("article {url} has no text after cleaning")]
    EmptyArticle { url: String },
    #[error("host of {url} is not on the allowlist")]
    Disallowed { url: String },
    #[error("article cache: {0}")]
    Cache(String),
    #[error("fixture source: {0}")]
    Fixture(String),
}

/// Ordered, case-insensitively distinct search phrases (1 to 5).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPhraseSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    pub phrases: Vec<String>,
}

impl KeyPhraseSet {
    /// Trims, drops empties, dedupes case-insensitively (first spelling
    /// wins) and keeps at most `max` phrases. Fails when nothing survives.
    pub fn new(question_id: Option<String>, phrases: Vec<String>, max: usize) -> Option<Self> {
        let mut seen = std::collections::HashSet::new();
        let phrases: Vec<String> = phrases
            .into_iter()
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty() && seen.insert(p.to_lowercase()))
            .take(max.clamp(1, MAX_KEYPHRASES))
            .collect();
        (!phrases.is_empty()).then_some(Self {
            question_id,
            phrases,
        })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArticleRef {
    pub url: Url,
    pub title: String,
    pub source_name: String,
    pub matched_phrase: String,
}

impl ArticleRef {
    #[doc(hidden)]
    pub fn for_test(url: &str, title: &str) -> Self {
        Self {
            url: Url::parse(url).expect("test url"),
            title: title.to_string(),
            source_name: "test".to_string(),
            matched_phrase: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleText {
    #[serde(rename = "ref")]
    pub article: ArticleRef,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

impl ArticleText {
    #[doc(hidden)]
    pub fn for_test(url: &str, title: &str, body: &str) -> Self {
        Self {
            article: ArticleRef::for_test(url, title),
            body: body.to_string(),
            fetched_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

/// A search result as reported by a source, before phrase tagging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub url: Url,
    pub title: String,
}

/// Where articles come from. `search` returns hits in the source's own
/// relevance order; `fetch` returns raw HTML.
#[async_trait]
pub trait ArticleSource: Send + Sync {
    fn name(&self) -> &str;

    async fn search(&self, phrase: &str, limit: usize) -> Result<Vec<SearchHit>, BrowserError>;

    async fn fetch(&self, url: &Url) -> Result<String, BrowserError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowserConfig {
    pub articles_per_phrase: usize,
    pub fetch_concurrency: usize,
}

impl Default for BrowserConfig {
    fn default() -> Self {
        Self {
            articles_per_phrase: DEFAULT_ARTICLES_PER_PHRASE,
            fetch_concurrency: DEFAULT_FETCH_CONCURRENCY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub article: ArticleText,
    pub cache_hit: bool,
}

/// Articles gathered for one question.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub keyphrases: KeyPhraseSet,
    pub articles: Vec<ArticleText>,
    pub warnings: Vec<String>,
    pub keyphrase_call: CallRecord,
}

#[derive(Debug, Clone, Default)]
pub struct GatheredArticles {
    pub refs: Vec<ArticleRef>,
    pub articles: Vec<ArticleText>,
    pub warnings: Vec<String>,
}

pub struct Browser {
    source: Arc<dyn ArticleSource>,
    cache: Option<Arc<ArticleCache>>,
    clock: Arc<dyn Clock>,
    config: BrowserConfig,
}

impl std::fmt::Debug for Browser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Browser")
            .field("source", &self.source.name())
            .field("cached", &self.cache.is_some())
            .field("config", &self.config)
            .finish()
    }
}

impl Browser {
    pub fn new(source: Arc<dyn ArticleSource>) -> Self {
        Self {
            source,
            cache: None,
            clock: Arc::new(SystemClock::new()),
            config: BrowserConfig::default(),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ArticleCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_config(mut self, config: BrowserConfig) -> Self {
        self.config = config;
        self
    }

    pub fn source_name(&self) -> &str {
        self.source.name()
    }

    pub fn config(&self) -> BrowserConfig {
        self.config
    }

    /// At most `limit` refs in source order, each tagged with `phrase`.
    pub async fn search_articles(
        &self,
        phrase: &str,
        limit: usize,
    ) -> Result<Vec<ArticleRef>, BrowserError> {
        if limit == 0 {
            return Err(BrowserError::InvalidLimit);
        }
        let hits = self.source.search(phrase, limit).await?;
        Ok(hits
            .into_iter()
            .take(limit)
            .map(|hit| ArticleRef {
                url: hit.url,
                title: hit.title,
                source_name: self.source.name().to_string(),
                matched_phrase: phrase.to_string(),
            })
            .collect())
    }

    pub async fn fetch_article(&self, article: &ArticleRef) -> Result<FetchOutcome, BrowserError> {
        if let Some(cache) = &self.cache {
            if let Some(mut cached) = cache.get(&article.url)? {
                cached.article = article.clone();
                return Ok(FetchOutcome {
                    article: cached,
                    cache_hit: true,
                });
            }
        }
        let html = self.source.fetch(&article.url).await?;
        let body = extract_main_text(&html);
        if body.trim().is_empty() {
            return Err(BrowserError::EmptyArticle {
                url: article.url.to_string(),
            });
        }
        let text = ArticleText {
            article: article.clone(),
            body,
            fetched_at: self.clock.now(),
        };
        if let Some(cache) = &self.cache {
            cache.put(&text)?;
        }
        Ok(FetchOutcome {
            article: text,
            cache_hit: false,
        })
    }

    /// Searches every phrase for up to `per_phrase` hits, dedupes refs by URL
    /// (first phrase wins) and fetches them with bounded concurrency. Failed
    /// searches and fetches become warnings; the result keeps search order.
    pub async fn collect_articles(
        &self,
        keyphrases: &KeyPhraseSet,
        per_phrase: usize,
    ) -> GatheredArticles {
        let mut gathered = GatheredArticles::default();
        let mut seen = std::collections::HashSet::new();
        let per_phrase = per_phrase.max(1);
        let cap = keyphrases.len() * per_phrase;
        for phrase in &keyphrases.phrases {
            match self.search_articles(phrase, per_phrase).await {
                Ok(refs) => {
                    for r in refs {
                        if gathered.refs.len() < cap && seen.insert(r.url.clone()) {
                            gathered.refs.push(r);
                        }
                    }
                }
                Err(e) => {
                    tracing::warn!(phrase, "search failed: {e}");
                    gathered
                        .warnings
                        .push(format!("search for {phrase:?} failed: {e}"));
                }
            }
        }

        // futures built up front keep the stream Send for tokio::spawn
        let fetches: Vec<_> = gathered
            .refs
            .iter()
            .map(|r| self.fetch_article(r))
            .collect();
        let outcomes: Vec<_> = stream::iter(fetches)
            .buffered(self.config.fetch_concurrency.max(1))
            .collect()
            .await;
        for (r, outcome) in gathered.refs.iter().zip(outcomes) {
            match outcome {
                Ok(o) => gathered.articles.push(o.article),
                Err(e) => {
                    tracing::warn!(url = %r.url, "fetch failed: {e}");
                    gathered
                        .warnings
                        .push(format!("fetch of {} failed: {e}", r.url));
                }
            }
        }
        if gathered.articles.is_empty() {
            gathered
                .warnings
                .push("no articles could be fetched".to_string());
        }
        gathered
    }

    /// Key-phrase extraction followed by [`Browser::collect_articles`].
    pub async fn gather_corpus(
        &self,
        gateway: &Gateway,
        profile: &BackendProfile,
        question: &str,
    ) -> Result<Corpus, BrowserError> {
        let (keyphrases, call) = extract_keyphrases(
            gateway,
            profile,
            question,
            None,
            &default_keyphrase_examples(),
            MAX_KEYPHRASES,
        )
        .await?;
        let gathered = self
            .collect_articles(&keyphrases, self.config.articles_per_phrase)
            .await;
        Ok(Corpus {
            keyphrases,
            articles: gathered.articles,
            warnings: gathered.warnings,
            keyphrase_call: call,
        })
    }
}

/// Lowercased alphanumeric word tokens.
pub(crate) fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}
