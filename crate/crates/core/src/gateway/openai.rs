//! OpenAI-compatible wire format for chat completions and embeddings.

use serde::{Deserialize, Serialize};
use url::Url;

use super::{AttemptError, BackendProfile, ChatRequest};

#[derive(Debug, Serialize)]
pub(crate) struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
pub(crate) struct ChatBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
}

pub(crate) fn chat_body<'a>(
    profile: &'a BackendProfile,
    req: &'a ChatRequest,
    temperature: f64,
) -> ChatBody<'a> {
    let mut messages = Vec::with_capacity(2 + 2 * req.few_shot.len());
    if !req.system_prompt.is_empty() {
        messages.push(ChatMessage {
            role: "system",
            content: &req.system_prompt,
        });
    }
    for example in &req.few_shot {
        messages.push(ChatMessage {
            role: "user",
            content: &example.user,
        });
        messages.push(ChatMessage {
            role: "assistant",
            content: &example.assistant,
        });
    }
    messages.push(ChatMessage {
        role: "user",
        content: &req.user_prompt,
    });
    ChatBody {
        model: &profile.model_id,
        messages,
        temperature,
        top_p: req.sampling.top_p,
    }
}

#[derive(Debug, Serialize)]
pub(crate) struct EmbeddingBody<'a> {
    pub model: &'a str,
    pub input: &'a [String],
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

/// Joins `path` onto the profile endpoint, which is expected to already
/// include any version prefix (e.g. `https://api.openai.com/v1`).
pub(crate) fn endpoint_url(base: &Url, path: &str) -> String {
    format!("{}/{}", base.as_str().trim_end_matches('/'), path)
}

async fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
    http: &reqwest::Client,
    url: &str,
    key: Option<&str>,
    body: &B,
) -> Result<R, AttemptError> {
    let mut request = http.post(url).json(body);
    if let Some(key) = key {
        request = request.bearer_auth(key);
    }
    let response = request.send().await.map_err(|e| AttemptError::Retryable {
        status: None,
        message: e.to_string(),
    })?;
    let status = response.status();
    if !status.is_success() {
        let text = response.text().await.unwrap_or_default();
        let message = format!("HTTP {}: {}", status.as_u16(), truncate(&text, 512));
        let code = Some(status.as_u16());
        return Err(if status.as_u16() == 429 || status.is_server_error() {
            AttemptError::Retryable {
                status: code,
                message,
            }
        } else {
            AttemptError::Fatal {
                status: code,
                message,
            }
        });
    }
    response
        .json::<R>()
        .await
        .map_err(|e| AttemptError::BadResponse(format!("undecodable body: {e}")))
}

pub(crate) async fn post_chat(
    http: &reqwest::Client,
    url: &str,
    key: Option<&str>,
    body: &ChatBody<'_>,
) -> Result<String, AttemptError> {
    let parsed: ChatResponse = post_json(http, url, key, body).await?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| AttemptError::BadResponse("response has no message content".into()))
}

pub(crate) async fn post_embeddings(
    http: &reqwest::Client,
    url: &str,
    key: Option<&str>,
    body: &EmbeddingBody<'_>,
) -> Result<Vec<Vec<f64>>, AttemptError> {
    let mut parsed: EmbeddingResponse = post_json(http, url, key, body).await?;
    if parsed.data.iter().all(|d| d.index.is_some()) {
        parsed.data.sort_by_key(|d| d.index);
    }
    Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
}

fn truncate(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}
