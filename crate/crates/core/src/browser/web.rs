use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use super::{ArticleSource, BrowserError, RateLimiter, SearchHit, DEFAULT_RATE_LIMIT};
use crate::clock::{Clock, SystemClock};

pub const DEFAULT_USER_AGENT: &str =
    concat!("webrag/", env!("CARGO_PKG_VERSION"), " (research QA bench)");

/// Settings for a site that exposes article search as an HTML results page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebSourceConfig {
    pub name: String,
    pub base_url: Url,
    /// Path of the search page; the phrase goes into the `q` parameter.
    pub search_path: String,
    /// Extra fixed query parameters for the search page.
    #[serde(default)]
    pub search_params: Vec<(String, String)>,
    /// Only links whose path starts with this prefix count as articles.
    pub article_path_prefix: String,
    pub user_agent: String,
    /// Hosts that may be fetched; empty means the base URL's host only.
    #[serde(default)]
    pub allowed_hosts: Vec<String>,
    pub rate_limit_ms: u64,
    pub timeout_ms: u64,
}

impl WebSourceConfig {
    pub fn radiopaedia() -> Self {
        Self {
            name: "radiopaedia".into(),
            base_url: Url::parse("https://radiopaedia.org").expect("static url"),
            search_path: "/search".into(),
            search_params: vec![
                ("lang".into(), "us".into()),
                ("scope".into(), "articles".into()),
            ],
            article_path_prefix: "/articles/".into(),
            user_agent: DEFAULT_USER_AGENT.into(),
            allowed_hosts: Vec::new(),
            rate_limit_ms: DEFAULT_RATE_LIMIT.as_millis() as u64,
            timeout_ms: 30_000,
        }
    }

    fn host_allowed(&self, url: &Url) -> bool {
        let Some(host) = url.host_str() else {
            return false;
        };
        if self.allowed_hosts.is_empty() {
            self.base_url.host_str() == Some(host)
                && self.base_url.port_or_known_default() == url.port_or_known_default()
        } else {
            self.allowed_hosts
                .iter()
                .any(|h| h.eq_ignore_ascii_case(host))
        }
    }
}

/// Live article source: scrapes the search results page, then fetches
/// article pages. Requests to a host are spaced by a [`RateLimiter`].
#[derive(Debug)]
pub struct WebSource {
    config: WebSourceConfig,
    http: reqwest::Client,
    limiter: Arc<RateLimiter>,
}

impl WebSource {
    pub fn new(config: WebSourceConfig) -> Result<Self, BrowserError> {
        Self::with_clock(config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(
        config: WebSourceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BrowserError> {
        let http = reqwest::Client::builder()
            .user_agent(config.user_agent.clone())
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BrowserError::Transport {
                url: config.base_url.to_string(),
                message: e.to_string(),
            })?;
        let limiter = Arc::new(RateLimiter::new(
            Duration::from_millis(config.rate_limit_ms),
            clock,
        ));
        Ok(Self {
            config,
            http,
            limiter,
        })
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    fn search_url(&self, phrase: &str) -> Result<Url, BrowserError> {
        let mut url = self
            .config
            .base_url
            .join(&self.config.search_path)
            .map_err(|e| BrowserError::Fixture(format!("bad search path: {e}")))?;
        {
            let mut q = url.query_pairs_mut();
            for (k, v) in &self.config.search_params {
                q.append_pair(k, v);
            }
            q.append_pair("q", phrase);
        }
        Ok(url)
    }

    async fn get(&self, url: &Url) -> Result<String, BrowserError> {
        if !self.config.host_allowed(url) {
            return Err(BrowserError::Disallowed {
                url: url.to_string(),
            });
        }
        self.limiter
            .acquire(url.host_str().unwrap_or_default())
            .await;
        let transport = |e: reqwest::Error| BrowserError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        };
        let resp = self.http.get(url.clone()).send().await.map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BrowserError::Http {
                url: url.to_string(),
                status: status.as_u16(),
            });
        }
        resp.text().await.map_err(transport)
    }

    /// Article links on a results page, deduplicated, in page order.
    pub fn parse_results(&self, page_url: &Url, html: &str) -> Vec<SearchHit> {
        let doc = Html::parse_document(html);
        let links = Selector::parse("a[href]").expect("static selector");
        let mut seen = std::collections::HashSet::new();
        let mut hits = Vec::new();
        for a in doc.select(&links) {
            // site chrome links to articles too
            let in_chrome = a
                .ancestors()
                .filter_map(scraper::ElementRef::wrap)
                .any(|e| matches!(e.value().name(), "nav" | "header" | "footer" | "aside"));
            if in_chrome {
                continue;
            }
            let Some(mut url) = a.value().attr("href").and_then(|h| page_url.join(h).ok()) else {
                continue;
            };
            url.set_fragment(None);
            url.set_query(None);
            if !url.path().starts_with(&self.config.article_path_prefix)
                || !self.config.host_allowed(&url)
            {
                continue;
            }
            let title = a.text().collect::<Vec<_>>().join(" ");
            let title = title.split_whitespace().collect::<Vec<_>>().join(" ");
            if title.is_empty() || !seen.insert(url.clone()) {
                continue;
            }
            hits.push(SearchHit { url, title });
        }
        hits
    }
}

#[async_trait]
impl ArticleSource for WebSource {
    fn name(&self) -> &str {
        &self.config.name
    }

    async fn search(&self, phrase: &str, limit: usize) -> Result<Vec<SearchHit>, BrowserError> {
        let url = self.search_url(phrase)?;
        let html = self.get(&url).await?;
        let mut hits = self.parse_results(&url, &html);
        hits.truncate(limit);
        Ok(hits)
    }

    async fn fetch(&self, url: &Url) -> Result<String, BrowserError> {
        self.get(url).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_url_encodes_phrase() {
        let src = WebSource::new(WebSourceConfig::radiopaedia()).unwrap();
        assert_eq!(
            src.search_url("liver mass").unwrap().as_str(),
            "https://radiopaedia.org/search?lang=us&scope=articles&q=liver+mass"
        );
    }

    #[test]
    fn parses_article_links_only() {
        let src = WebSource::new(WebSourceConfig::radiopaedia()).unwrap();
        let page = Url::parse("https://radiopaedia.org/search?q=x").unwrap();
        let html = r#"<a href="/articles/hepatoblastoma?lang=us">
              <span>Hepatoblastoma</span></a>
            <a href="/cases/hepatoblastoma-1">Case</a>
            <a href="/articles/hepatoblastoma#imaging">Hepatoblastoma again</a>
            <a href="https://evil.example/articles/x">Elsewhere</a>
            <a href="/articles/undifferentiated-embryonal-sarcoma-of-the-liver">Undifferentiated embryonal sarcoma of the liver</a>"#;
        let hits = src.parse_results(&page, html);
        let got: Vec<_> = hits
            .iter()
            .map(|h| (h.url.as_str(), h.title.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                ("https://radiopaedia.org/articles/hepatoblastoma", "Hepatoblastoma"),
                (
                    "https://radiopaedia.org/articles/undifferentiated-embryonal-sarcoma-of-the-liver",
                    "Undifferentiated embryonal sarcoma of the liver"
                ),
            ]
        );
    }

    #[tokio::test]
    async fn refuses_hosts_outside_allowlist() {
        let src = WebSource::new(WebSourceConfig::radiopaedia()).unwrap();
        let url = Url::parse("https://evil.example/articles/x").unwrap();
        assert!(matches!(
            src.fetch(&url).await,
            Err(BrowserError::Disallowed { .. })
        ));
    }
}
