use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use super::{ArticleText, BrowserError};
use crate::clock::Clock;

pub const DEFAULT_CACHE_TTL: Duration = Duration::from_secs(24 * 60 * 60);

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheMeta {
    url: String,
    fetched_at: DateTime<Utc>,
}

/// Cleaned articles on disk, one JSON file per URL (named by the SHA-256 of
/// the URL) plus an `index.json` of fetch times.
#[derive(Debug)]
pub struct ArticleCache {
    dir: PathBuf,
    ttl: Duration,
    clock: Arc<dyn Clock>,
    index: Mutex<BTreeMap<String, CacheMeta>>,
}

fn cache_err(path: &Path, e: impl std::fmt::Display) -> BrowserError {
    BrowserError::Cache(format!("{}: {e}", path.display()))
}

fn key(url: &Url) -> String {
    hex::encode(Sha256::digest(url.as_str().as_bytes()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BrowserError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| cache_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| cache_err(path, e))
}

impl ArticleCache {
    pub fn open(dir: &Path, ttl: Duration, clock: Arc<dyn Clock>) -> Result<Self, BrowserError> {
        std::fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
        let index_path = dir.join(INDEX_FILE);
        let index = match std::fs::read_to_string(&index_path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
                tracing::warn!(
                    "ignoring unreadable cache index {}: {e}",
                    index_path.display()
                );
                BTreeMap::new()
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(cache_err(&index_path, e)),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            ttl,
            clock,
            index: Mutex::new(index),
        })
    }

    pub fn len(&self) -> usize {
        self.index.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The cached article if present and younger than the TTL.
    pub fn get(&self, url: &Url) -> Result<Option<ArticleText>, BrowserError> {
        let k = key(url);
        let fresh = self.index.lock().unwrap().get(&k).is_some_and(|meta| {
            (self.clock.now() - meta.fetched_at)
                .to_std()
                .map_or(true, |age| age < self.ttl)
        });
        if !fresh {
            return Ok(None);
        }
        let path = self.dir.join(format!("{k}.json"));
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(cache_err(&path, e)),
        }
    }

    pub fn put(&self, article: &ArticleText) -> Result<(), BrowserError> {
        let k = key(&article.article.url);
        let path = self.dir.join(format!("{k}.json"));
        let body = serde_json::to_vec_pretty(article).map_err(|e| cache_err(&path, e))?;
        write_atomic(&path, &body)?;
        let mut index = self.index.lock().unwrap();
        index.insert(
            k,
            CacheMeta {
                url: article.article.url.to_string(),
                fetched_at: article.fetched_at,
            },
        );
        let index_path = self.dir.join(INDEX_FILE);
        let bytes = serde_json::to_vec_pretty(&*index).map_err(|e| cache_err(&index_path, e))?;
        write_atomic(&index_path, &bytes)
    }
}
