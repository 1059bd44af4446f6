use serde::{Deserialize, Serialize};

use crate::index::ScoredChunk;

pub const RAG_INSTRUCTION: &str = "Use the following pieces of retrieved context to answer the question. If you don't know the answer, say 'I don't know.' Answer concisely in one sentence.";

pub const RAG_INSTRUCTION_ASSISTANT: &str = "You are a helpful expert medical research assistant. Use the following pieces of retrieved context to answer the question. If you don't know the answer, just say that you don't know. Use one sentence only and keep the answer concise:";

pub const CONVENTIONAL_INSTRUCTION: &str =
    "You are a helpful expert medical research assistant. Answer the following question concisely in one sentence";

pub const CONVENTIONAL_INSTRUCTION_ASSISTANT: &str = "You are a helpful expert medical research assistant. Answer the following question. Use one sentence only and keep the answer concise:";

/// Stands in for the context block when retrieval produced nothing.
pub const NO_CONTEXT_PLACEHOLDER: &str = "(no context retrieved)";

/// Named wording variants for the answer prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptPreset {
    #[default]
    Standard,
    Assistant,
}

impl PromptPreset {
    pub fn rag_instruction(self) -> &'static str {
        match self {
            Self::Standard => RAG_INSTRUCTION,
            Self::Assistant => RAG_INSTRUCTION_ASSISTANT,
        }
    }

    pub fn conventional_instruction(self) -> &'static str {
        match self {
            Self::Standard => CONVENTIONAL_INSTRUCTION,
            Self::Assistant => CONVENTIONAL_INSTRUCTION_ASSISTANT,
        }
    }
}

impl std::str::FromStr for PromptPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "assistant" => Ok(Self::Assistant),
            other => Err(format!(
                "unknown prompt preset {other:?} (expected standard or assistant)"
            )),
        }
    }
}

/// Instruction, then one block per chunk with its source URL, then the
/// question.
pub fn rag_prompt(preset: PromptPreset, question: &str, chunks: &[ScoredChunk]) -> String {
    let mut out = String::from(preset.rag_instruction());
    out.push_str("\n\n");
    if chunks.is_empty() {
        out.push_str("- Retrieved Context: ");
        out.push_str(NO_CONTEXT_PLACEHOLDER);
        out.push_str("\n\n");
    }
    for c in chunks {
        out.push_str("- Retrieved Context: ");
        out.push_str(c.chunk.text.trim());
        out.push_str("\n[Source: ");
        out.push_str(c.chunk.article_ref.url.as_str());
        out.push_str("]\n\n");
    }
    out.push_str("- Question: ");
    out.push_str(question.trim());
    out
}

pub fn conventional_prompt(preset: PromptPreset, question: &str) -> String {
    format!(
        "{}\n\n- Question: {}",
        preset.conventional_instruction(),
        question.trim()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::browser::ArticleRef;
    use crate::index::Chunk;

    fn scored(url: &str, text: &str) -> ScoredChunk {
        ScoredChunk {
            chunk: Chunk {
                article_ref: ArticleRef::for_test(url, "t"),
                token_start: 0,
                token_count: 1,
                text: text.into(),
            },
            score: 0.5,
        }
    }

    #[test]
    fn rag_prompt_layout() {
        let p = rag_prompt(
            PromptPreset::Standard,
            "What is it?",
            &[
                scored("https://example.org/a", "Alpha."),
                scored("https://example.org/b", " Beta. "),
            ],
        );
        assert_eq!(
            p,
            format!(
                "{RAG_INSTRUCTION}\n\n- Retrieved Context: Alpha.\n[Source: https://example.org/a]\n\n- Retrieved Context: Beta.\n[Source: https://example.org/b]\n\n- Question: What is it?"
            )
        );
    }

    #[test]
    fn empty_context_uses_placeholder_not_conventional_prompt() {
        let p = rag_prompt(PromptPreset::Assistant, "Q?", &[]);
        assert!(p.starts_with(RAG_INSTRUCTION_ASSISTANT));
        assert!(p.contains(NO_CONTEXT_PLACEHOLDER));
        assert!(!p.contains("[Source:"));
    }

    #[test]
    fn conventional_prompt_has_no_context() {
        let p = conventional_prompt(PromptPreset::Standard, " Q? ");
        assert_eq!(p, format!("{CONVENTIONAL_INSTRUCTION}\n\n- Question: Q?"));
        assert_eq!(
            "assistant".parse::<PromptPreset>().unwrap(),
            PromptPreset::Assistant
        );
        assert!("other".parse::<PromptPreset>().is_err());
    }
}
