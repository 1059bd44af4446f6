//! Tokenization, overlapping-window chunking and the per-question vector
//! index with exhaustive cosine top-k retrieval.

mod chunk;
mod tokenize;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::gateway::{BackendProfile, CallRecord, EmbeddingVector, Gateway, GatewayError};

pub use chunk::{
    chunk, chunk_article, chunk_windows, Chunk, ChunkingParams, DEFAULT_CHUNK_OVERLAP,
    DEFAULT_CHUNK_SIZE,
};
pub use tokenize::{tokenize, TokenSpan, Tokenizer, WordPunctTokenizer};

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("invalid chunking parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: index has {index}, query has {query}")]
    DimensionMismatch { index: usize, query: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error(transparent)]
    Embedding(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk: Chunk,
    pub vector: EmbeddingVector,
}

/// In-memory index built for a single question. Never written to disk.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    entries: Vec<IndexEntry>,
    dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
}

impl VectorIndex {
    pub fn from_entries(entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        let dimension = entries.first().map_or(0, |e| e.vector.dimension);
        if let Some(bad) = entries.iter().find(|e| e.vector.dimension != dimension) {
            return Err(IndexError::DimensionMismatch {
                index: dimension,
                query: bad.vector.dimension,
            });
        }
        Ok(Self { entries, dimension })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Zero for an empty index.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// The `k` entries most cosine-similar to `query`, best first. Equal
    /// scores keep insertion order.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredChunk>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        if query.dimension != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                query: query.dimension,
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, cosine_similarity(&query.values, &e.vector.values)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(i, score)| ScoredChunk {
                chunk: self.entries[i].chunk.clone(),
                score,
            })
            .collect())
    }
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        tracing::warn!("zero vector in cosine similarity, scoring 0");
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Embeds every chunk through `profile` and returns the index plus the
/// embedding call record (absent when there were no chunks).
pub async fn build_index(
    gateway: &Gateway,
    profile: &BackendProfile,
    chunks: Vec<Chunk>,
) -> Result<(VectorIndex, Option<CallRecord>), IndexError> {
    if chunks.is_empty() {
        return Ok((VectorIndex::default(), None));
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let embeddings = gateway.embed(profile, &texts).await?;
    let entries = chunks
        .into_iter()
        .zip(embeddings.vectors)
        .map(|(chunk, vector)| IndexEntry { chunk, vector })
        .collect();
    Ok((VectorIndex::from_entries(entries)?, Some(embeddings.record)))
}
