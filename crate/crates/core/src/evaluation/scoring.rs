use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::EvalError;
use crate::gateway::{BackendProfile, ChatRequest, Gateway, SamplingParams};

/// Function words ignored when matching reference terms.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "e", "eg", "for", "from", "g", "in", "into",
    "is", "its", "of", "on", "or", "s", "the", "to", "with",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Any `;`-separated clause of the reference suffices.
    AutoMatch,
    /// Every clause must match.
    AutoMatchStrict,
}

/// Lowercase, strip diacritics and punctuation, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let folded: String = text
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

static PARENTHETICAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[(\[].*").expect("valid regex"));

/// Content words of each clause head: the clause text before any
/// parenthetical, normalized, without stopwords. Empty clauses are dropped.
pub fn reference_terms(reference: &str) -> Vec<Vec<String>> {
    reference
        .split(';')
        .map(|clause| {
            let head = PARENTHETICAL.replace(clause, "");
            normalize(&head)
                .split(' ')
                .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .filter(|terms| !terms.is_empty())
        .collect()
}

/// 1 when the answer contains every content word of a reference clause
/// head (any clause, or all clauses in strict mode).
pub fn auto_match(answer: &str, reference: &str, mode: MatchMode) -> Result<u8, EvalError> {
    if answer.trim().is_empty() || reference.trim().is_empty() {
        return Err(EvalError::EmptyText);
    }
    let words: HashSet<String> = normalize(answer).split(' ').map(str::to_string).collect();
    let clauses = reference_terms(reference);
    if clauses.is_empty() {
        return Err(EvalError::EmptyText);
    }
    let hit = |terms: &Vec<String>| terms.iter().all(|t| words.contains(t));
    let matched = match mode {
        MatchMode::AutoMatch => clauses.iter().any(hit),
        MatchMode::AutoMatchStrict => clauses.iter().all(hit),
    };
    Ok(u8::from(matched))
}

pub const JUDGE_SYSTEM_PROMPT: &str = "You grade answers to radiology questions against a reference answer. Reply with a single word: yes if the candidate answer correctly addresses the question in agreement with the reference answer, otherwise no.";

pub fn judge_prompt(question: &str, answer: &str, reference: &str) -> String {
    format!(
        "Question: {}\n\nReference answer: {}\n\nCandidate answer: {}\n\nIs the candidate answer correct? Answer yes or no.",
        question.trim(),
        reference.trim(),
        answer.trim()
    )
}

/// Reads a yes/no verdict; anything else (including both words) is `None`.
pub fn parse_verdict(text: &str) -> Option<u8> {
    let norm = normalize(text);
    let mut words = norm.split(' ');
    match words.next() {
        Some("yes") => return Some(1),
        Some("no") => return Some(0),
        _ => {}
    }
    let yes = norm.split(' ').any(|w| w == "yes" || w == "correct");
    let no = norm.split(' ').any(|w| w == "no" || w == "incorrect");
    match (yes, no) {
        (true, false) => Some(1),
        (false, true) => Some(0),
        _ => None,
    }
}

/// Grades with an LLM judge at temperature 0. An unreadable verdict is an
/// error, never a silent 0.
pub async fn judge_model(
    gateway: &Gateway,
    profile: &BackendProfile,
    question: &str,
    answer: &str,
    reference: &str,
) -> Result<u8, EvalError> {
    if answer.trim().is_empty() || reference.trim().is_empty() {
        return Err(EvalError::EmptyText);
    }
    let req = ChatRequest::new(
        JUDGE_SYSTEM_PROMPT,
        judge_prompt(question, answer, reference),
    )
    .with_sampling(SamplingParams::default());
    let completion = gateway.chat(profile, &req).await?;
    parse_verdict(&completion.text).ok_or(EvalError::Ungradable {
        verdict: completion.text,
    })
}
