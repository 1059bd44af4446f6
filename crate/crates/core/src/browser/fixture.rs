use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use url::Url;

use super::{words, ArticleSource, BrowserError, SearchHit};

/// One entry of a fixture corpus `index.json`. The page is either inline
/// (`html`) or a file relative to the corpus directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureArticle {
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub html: Option<String>,
    /// Forced HTTP status for fetches, to simulate broken pages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
}

#[derive(Debug, Deserialize)]
struct FixtureIndex {
    #[serde(default)]
    source_name: Option<String>,
    articles: Vec<FixtureArticle>,
}

#[derive(Debug)]
struct Entry {
    url: Url,
    title: String,
    terms: Vec<String>,
    html: String,
    status: Option<u16>,
}

/// Offline article source backed by a directory or an in-memory list.
///
/// A phrase matches an article when every word of the phrase occurs among
/// the words of its title and keywords. Hits come back in index order.
#[derive(Debug)]
pub struct FixtureSource {
    name: String,
    entries: Vec<Entry>,
    by_url: HashMap<Url, usize>,
    searches: AtomicUsize,
    fetches: AtomicUsize,
}

impl FixtureSource {
    pub fn from_articles(
        name: impl Into<String>,
        articles: Vec<FixtureArticle>,
    ) -> Result<Self, BrowserError> {
        let mut entries = Vec::with_capacity(articles.len());
        let mut by_url = HashMap::new();
        for a in articles {
            let url = Url::parse(&a.url)
                .map_err(|e| BrowserError::Fixture(format!("bad url {:?}: {e}", a.url)))?;
            if by_url.insert(url.clone(), entries.len()).is_some() {
                return Err(BrowserError::Fixture(format!("duplicate url {url}")));
            }
            let mut terms = words(&a.title);
            for k in &a.keywords {
                terms.extend(words(k));
            }
            entries.push(Entry {
                url,
                title: a.title,
                terms,
                html: a.html.unwrap_or_default(),
                status: a.status,
            });
        }
        Ok(Self {
            name: name.into(),
            entries,
            by_url,
            searches: AtomicUsize::new(0),
            fetches: AtomicUsize::new(0),
        })
    }

    /// Loads `<dir>/index.json`, reading each article's `file` relative to `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, BrowserError> {
        let index_path = dir.join("index.json");
        let text = std::fs::read_to_string(&index_path)
            .map_err(|e| BrowserError::Fixture(format!("{}: {e}", index_path.display())))?;
        let index: FixtureIndex = serde_json::from_str(&text)
            .map_err(|e| BrowserError::Fixture(format!("{}: {e}", index_path.display())))?;
        let mut articles = index.articles;
        for a in &mut articles {
            if a.html.is_none() {
                if let Some(file) = &a.file {
                    let path = dir.join(file);
                    a.html =
                        Some(std::fs::read_to_string(&path).map_err(|e| {
                            BrowserError::Fixture(format!("{}: {e}", path.display()))
                        })?);
                }
            }
        }
        Self::from_articles(
            index.source_name.unwrap_or_else(|| "fixture".to_string()),
            articles,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn search_count(&self) -> usize {
        self.searches.load(Ordering::Relaxed)
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl ArticleSource for FixtureSource {
    fn name(&self) -> &str {
        &self.name
    }

    async fn search(&self, phrase: &str, limit: usize) -> Result<Vec<SearchHit>, BrowserError> {
        self.searches.fetch_add(1, Ordering::Relaxed);
        let wanted = words(phrase);
        if wanted.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self
            .entries
            .iter()
            .filter(|e| wanted.iter().all(|w| e.terms.contains(w)))
            .take(limit)
            .map(|e| SearchHit {
                url: e.url.clone(),
                title: e.title.clone(),
            })
            .collect())
    }

    async fn fetch(&self, url: &Url) -> Result<String, BrowserError> {
        self.fetches.fetch_add(1, Ordering::Relaxed);
        let entry = self
            .by_url
            .get(url)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| BrowserError::Http {
                url: url.to_string(),
                status: 404,
            })?;
        match entry.status {
            Some(status) if !(200..300).contains(&status) => Err(BrowserError::Http {
                url: url.to_string(),
                status,
            }),
            _ => Ok(entry.html.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn loads_directory_index() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.html"), "<p>A</p>").unwrap();
        std::fs::write(
            dir.path().join("index.json"),
            r#"{"source_name": "local", "articles": [
                {"url": "https://example.org/articles/a", "title": "Liver mass", "keywords": ["hepatic"], "file": "a.html"}
            ]}"#,
        )
        .unwrap();
        let src = FixtureSource::from_dir(dir.path()).unwrap();
        assert_eq!(src.name(), "local");
        assert_eq!(src.search("Hepatic mass", 5).await.unwrap().len(), 1);
        assert!(src.search("renal mass", 5).await.unwrap().is_empty());
        let url = Url::parse("https://example.org/articles/a").unwrap();
        assert_eq!(src.fetch(&url).await.unwrap(), "<p>A</p>");
        assert_eq!((src.search_count(), src.fetch_count()), (2, 1));
    }

    #[test]
    fn rejects_bad_indexes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(FixtureSource::from_dir(dir.path()).is_err());
        let dup = FixtureArticle {
            url: "https://example.org/x".into(),
            title: "x".into(),
            keywords: vec![],
            file: None,
            html: None,
            status: None,
        };
        assert!(FixtureSource::from_articles("f", vec![dup.clone(), dup]).is_err());
    }
}
