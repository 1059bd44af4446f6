//! Deterministic offline chat backends.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatRequest, GatewayError};

/// Prefix the echo backend puts in front of the user prompt.
pub const ECHO_MARKER: &str = "[echo] ";

/// One row of a scripted response table. A rule fires when its regex
/// `pattern` (if any) matches the user prompt and every `contains` literal
/// occurs in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ScriptFile {
    rules: Vec<ScriptRule>,
}

/// Pattern → response table; first matching rule wins, otherwise the
/// prompt is echoed.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChat {
    rules: Vec<(Option<Regex>, ScriptRule)>,
}

impl ScriptedChat {
    pub fn new(rules: Vec<ScriptRule>) -> Result<Self, GatewayError> {
        let rules = rules
            .into_iter()
            .map(|rule| {
                let regex = rule
                    .pattern
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| GatewayError::Configuration(format!("bad script pattern: {e}")))?;
                if regex.is_none() && rule.contains.is_empty() {
                    return Err(GatewayError::Configuration(
                        "script rule needs a pattern or contains list".into(),
                    ));
                }
                Ok((regex, rule))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    /// Parses a `{"rules": [...]}` JSON document.
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let file: ScriptFile = serde_json::from_str(text)
            .map_err(|e| GatewayError::Configuration(format!("bad script file: {e}")))?;
        Self::new(file.rules)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GatewayError::Configuration(format!("cannot read script {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Appends the rules of `other` after this table's rules.
    pub fn extend(&mut self, other: ScriptedChat) {
        self.rules.extend(other.rules);
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn respond(&self, req: &ChatRequest) -> String {
        let prompt = req.user_prompt.as_str();
        self.rules
            .iter()
            .find(|(regex, rule)| {
                regex.as_ref().is_none_or(|r| r.is_match(prompt))
                    && rule
                        .contains
                        .iter()
                        .all(|needle| prompt.contains(needle.as_str()))
            })
            .map(|(_, rule)| rule.response.clone())
            .unwrap_or_else(|| format!("{ECHO_MARKER}{prompt}"))
    }
}
