use std::sync::LazyLock;

use regex::Regex;

use super::{BrowserError, KeyPhraseSet};
use crate::gateway::{
    BackendProfile, CallRecord, ChatRequest, FewShotExample, Gateway, SamplingParams,
};

pub const KEYPHRASE_SYSTEM_PROMPT: &str = "You are a helpful expert medical research assistant. I have a medical question, particularly in the field of radiology. Please summarize the question to extract the most representative keywords for use in online scientific article searches. Return a maximum of five keywords that are scientifically relevant to radiology.";

/// Two worked examples sent ahead of the question. These are illustrative
/// defaults written for this tool; override them through configuration.
pub fn default_keyphrase_examples() -> Vec<FewShotExample> {
    vec![
        FewShotExample {
            user: "A 52-year-old woman presents with a palpable lump in the left breast. Mammography shows an irregular mass with spiculated margins and associated fine pleomorphic calcifications. What is the most likely diagnosis?".into(),
            assistant: "breast mass, spiculated margins, pleomorphic calcifications, mammography, invasive breast carcinoma".into(),
        },
        FewShotExample {
            user: "A 35-year-old man reports a sudden, severe headache. Non-contrast CT of the head shows hyperdense material filling the basal cisterns and sylvian fissures. What is the most likely diagnosis?".into(),
            assistant: "thunderclap headache, non-contrast head CT, basal cisterns hyperdensity, subarachnoid hemorrhage".into(),
        },
    ]
}

pub fn keyphrase_request(question: &str, examples: &[FewShotExample]) -> ChatRequest {
    ChatRequest::new(KEYPHRASE_SYSTEM_PROMPT, question)
        .with_few_shot(examples.to_vec())
        .with_sampling(SamplingParams::default())
}

static BULLET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[-*•·]+|\(?\d+[.):]|[a-zA-Z][.)])\s*").expect("valid regex"));
static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:key[- ]?phrases?|keywords?|search terms?)\s*:\s*").expect("valid regex")
});

/// Splits a completion on commas and newlines, strips list bullets,
/// numbering, labels and quotes, then applies [`KeyPhraseSet::new`].
pub fn parse_keyphrases(completion: &str, max: usize) -> Vec<String> {
    let raw: Vec<String> = completion
        .split([',', '\n'])
        .map(|piece| {
            let mut p = piece.trim();
            p = LABEL.find(p).map_or(p, |m| &p[m.end()..]);
            p = BULLET.find(p).map_or(p, |m| &p[m.end()..]);
            p.trim()
                .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '“' | '”' | '‘' | '’'))
                .trim_end_matches(['.', ';'])
                .trim()
                .to_string()
        })
        .collect();
    KeyPhraseSet::new(None, raw, max)
        .map(|s| s.phrases)
        .unwrap_or_default()
}

pub async fn extract_keyphrases(
    gateway: &Gateway,
    profile: &BackendProfile,
    question: &str,
    question_id: Option<String>,
    examples: &[FewShotExample],
    max: usize,
) -> Result<(KeyPhraseSet, CallRecord), BrowserError> {
    if question.trim().is_empty() {
        return Err(BrowserError::EmptyQuestion);
    }
    let completion = gateway
        .chat(profile, &keyphrase_request(question, examples))
        .await?;
    let phrases = parse_keyphrases(&completion.text, max);
    let set =
        KeyPhraseSet::new(question_id, phrases, max).ok_or_else(|| BrowserError::NoKeyphrases {
            completion: completion.text.clone(),
        })?;
    Ok((set, completion.record))
}
