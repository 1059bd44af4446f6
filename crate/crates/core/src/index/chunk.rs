use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::tokenize::{TokenSpan, Tokenizer};
use super::IndexError;
use crate::browser::{ArticleRef, ArticleText};

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_CHUNK_OVERLAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingParams {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkingParams {
    fn default() -> Self {
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_CHUNK_OVERLAP,
        }
    }
}

impl ChunkingParams {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, IndexError> {
        let params = Self {
            chunk_size,
            overlap,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if self.chunk_size == 0 {
            return Err(IndexError::InvalidParams(
                "chunk_size must be positive".into(),
            ));
        }
        if self.overlap >= self.chunk_size {
            return Err(IndexError::InvalidParams(format!(
                "overlap ({}) must be smaller than chunk_size ({})",
                self.overlap, self.chunk_size
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

/// Token ranges of the sliding windows over `token_count` tokens.
///
/// Window `i` starts at `i * stride`; the window that reaches the last token
/// is the final one and may be shorter than `chunk_size`.
pub fn chunk_windows(
    token_count: usize,
    params: &ChunkingParams,
) -> Result<Vec<Range<usize>>, IndexError> {
    params.validate()?;
    let mut windows = Vec::new();
    let mut start = 0;
    while start < token_count {
        let end = (start + params.chunk_size).min(token_count);
        windows.push(start..end);
        if end == token_count {
            break;
        }
        start += params.stride();
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub article_ref: ArticleRef,
    pub token_start: usize,
    pub token_count: usize,
    pub text: String,
}

/// Windows over `tokens`; chunk text is the tokens joined by single spaces.
/// Use [`chunk_article`] to keep the source's original spacing.
pub fn chunk(
    article_ref: &ArticleRef,
    tokens: &[TokenSpan],
    params: &ChunkingParams,
) -> Result<Vec<Chunk>, IndexError> {
    Ok(chunk_windows(tokens.len(), params)?
        .into_iter()
        .map(|w| Chunk {
            article_ref: article_ref.clone(),
            token_start: w.start,
            token_count: w.len(),
            text: tokens[w]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect())
}

/// Chunks an article body; each chunk's text is the exact source slice from
/// its first token to its last.
pub fn chunk_article(
    article: &ArticleText,
    tokenizer: &dyn Tokenizer,
    params: &ChunkingParams,
) -> Result<Vec<Chunk>, IndexError> {
    let tokens = tokenizer.tokenize(&article.body);
    // char offset -> byte offset, with one extra entry for the end of text
    let byte_at: Vec<usize> = article
        .body
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(article.body.len()))
        .collect();
    Ok(chunk_windows(tokens.len(), params)?
        .into_iter()
        .map(|w| {
            let first = &tokens[w.start];
            let last = &tokens[w.end - 1];
            Chunk {
                article_ref: article.article.clone(),
                token_start: w.start,
                token_count: w.len(),
                text: article.body[byte_at[first.start_offset]..byte_at[last.end_offset]]
                    .to_string(),
            }
        })
        .collect())
}
