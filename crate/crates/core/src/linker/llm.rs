use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chart::DataTable;
use crate::narration::NarrationText;

use super::{build_prompt, parse_llm_output, LinkError, ParsedLinks};

pub const ENDPOINT_VAR: &str = "NARRATE_LLM_ENDPOINT";
pub const MODEL_VAR: &str = "NARRATE_LLM_MODEL";
pub const KEY_VAR: &str = "NARRATE_LLM_KEY";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("llm transport error: {0}")]
    Transport(String),
    #[error("llm response malformed: {0}")]
    Malformed(String),
    #[error("llm client is not configured: set {0}")]
    NotConfigured(&'static str),
}

/// A chat-completion service. Implementations send `prompt` as the single
/// user message at temperature 0 and return the reply text.
pub trait LlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    pub endpoint: String,
    pub model: String,
    pub key: String,
    pub timeout: Duration,
}

impl HttpLlmClient {
    pub fn from_env() -> Result<Self, LlmError> {
        let var = |name: &'static str| std::env::var(name).map_err(|_| LlmError::NotConfigured(name));
        Ok(Self {
            endpoint: var(ENDPOINT_VAR)?,
            model: var(MODEL_VAR)?,
            key: var(KEY_VAR)?,
            timeout: Duration::from_secs(120),
        })
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let resp = client
            .post(&self.endpoint)
            .bearer_auth(&self.key)
            .json(&WireRequest {
                model: &self.model,
                messages: [WireMessage {
                    role: "user",
                    content: prompt,
                }],
                temperature: 0.0,
            })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let wire: WireResponse = resp.json().map_err(|e| LlmError::Malformed(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
        Ok(choice.message.content.unwrap_or_default())
    }
}

/// Prompts the client, stores the raw reply at `transcript` when given, and
/// parses it. The transcript is written before the empty-reply check so a
/// failed run can still be audited.
pub fn link_llm(
    tables: &[DataTable],
    text: &NarrationText,
    client: &dyn LlmClient,
    transcript: Option<&Path>,
) -> Result<ParsedLinks, LinkError> {
    let prompt = build_prompt(tables, text);
    let raw = client
        .complete(&prompt)
        .map_err(|e| LinkError::LlmUnreachable(e.to_string()))?;
    if let Some(path) = transcript {
        std::fs::write(path, &raw).map_err(|source| LinkError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    if raw.trim().is_empty() {
        return Err(LinkError::LlmEmptyOutput);
    }
    Ok(parse_llm_output(&raw, text, tables))
}
