//! Replay of mutating requests under a client-supplied `Idempotency-Key`.
//!
//! The first successful response for a (route, key) pair is written to an
//! append-only log before it is returned. A retry with the same key and the
//! same body gets that response again; the same key with a different body
//! is rejected.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::OwnedMutexGuard;

use crate::store::{append_lines, read_jsonl};
use crate::ServiceError;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const REPLAYED_HEADER: &str = "idempotent-replayed";
pub const IDEMPOTENCY_FILE: &str = "idempotency.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub scope: String,
    pub key: String,
    pub request_hash: String,
    pub status: u16,
    pub body: serde_json::Value,
}

type Scoped = (String, String);

#[derive(Debug)]
pub struct IdempotencyLog {
    path: PathBuf,
    entries: Mutex<HashMap<Scoped, StoredResponse>>,
    inflight: Mutex<HashMap<Scoped, Arc<tokio::sync::Mutex<()>>>>,
}

pub fn request_hash(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

impl IdempotencyLog {
    pub fn open(path: PathBuf) -> Result<Self, ServiceError> {
        let entries = read_jsonl::<StoredResponse>(&path)?
            .into_iter()
            .map(|r| ((r.scope.clone(), r.key.clone()), r))
            .collect();
        Ok(Self {
            path,
            entries: Mutex::new(entries),
            inflight: Mutex::new(HashMap::new()),
        })
    }

    /// Held while a keyed request runs, so a concurrent retry waits for the
    /// first attempt and then replays it.
    pub async fn lock(&self, scope: &str, key: &str) -> OwnedMutexGuard<()> {
        let m = self
            .inflight
            .lock()
            .unwrap()
            .entry((scope.to_string(), key.to_string()))
            .or_default()
            .clone();
        m.lock_owned().await
    }

    pub fn get(&self, scope: &str, key: &str) -> Option<StoredResponse> {
        self.entries
            .lock()
            .unwrap()
            .get(&(scope.to_string(), key.to_string()))
            .cloned()
    }

    pub fn record(&self, response: StoredResponse) -> Result<(), ServiceError> {
        let line = serde_json::to_string(&response).expect("stored response serializes");
        let mut entries = self.entries.lock().unwrap();
        append_lines(&self.path, &[line])?;
        entries.insert((response.scope.clone(), response.key.clone()), response);
        Ok(())
    }
}
