use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PromptSpec;
use crate::http::{endpoint, env_token, JsonClient};
use crate::retry::{with_retries, Attempt, RetryPolicy};

pub const LLM_API_KEY_VAR: &str = "LLM_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("chat endpoint unavailable after {attempts} attempts: {detail}")]
    RemoteUnavailable { attempts: u32, detail: String },
    #[error("chat endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("chat endpoint rejected the prompt as too long: {0}")]
    BudgetExceededByServer(String),
    #[error("chat endpoint error: {0}")]
    Remote(String),
}

impl GenError {
    /// Endpoint-level failures, as opposed to problems with one record.
    pub fn is_remote(&self) -> bool {
        matches!(self, GenError::RemoteUnavailable { .. } | GenError::Remote(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub summary: String,
    pub model_id: String,
    pub prompt_tokens_est: usize,
    pub latency_ms: u64,
    pub attempts: u32,
}

pub trait Generator: Send + Sync {
    fn model_id(&self) -> String;
    fn generate(&self, spec: &PromptSpec) -> Result<GenerationResult, GenError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct ChatClient {
    cfg: EndpointConfig,
    client: JsonClient,
    token: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Self {
        let client = JsonClient::new(Duration::from_secs(cfg.timeout_secs));
        Self { token: env_token(LLM_API_KEY_VAR), client, cfg }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn messages(spec: &PromptSpec) -> Vec<ChatMessage> {
        vec![
            ChatMessage { role: "system".into(), content: spec.system_message.clone() },
            ChatMessage { role: "user".into(), content: spec.user_message.clone() },
        ]
    }
}

fn is_context_overflow(status: u16, body: &str) -> bool {
    let lower = body.to_lowercase();
    (status == 400 || status == 413)
        && (lower.contains("context_length_exceeded")
            || lower.contains("context length")
            || lower.contains("maximum context")
            || lower.contains("too many tokens"))
}

impl Generator for ChatClient {
    fn model_id(&self) -> String {
        self.cfg.model.clone()
    }

    fn generate(&self, spec: &PromptSpec) -> Result<GenerationResult, GenError> {
        let url = endpoint(&self.cfg.base_url, "chat/completions");
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: Self::messages(spec),
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        };
        let started = Instant::now();
        let (result, attempts) =
            with_retries(&self.cfg.retry, |_| match self.client.post_json(&url, self.token.as_deref(), &body) {
                Err(e) => Attempt::Retry(e),
                Ok(r) if r.is_success() => Attempt::Done(Ok(r.body)),
                Ok(r) if r.is_retryable() => Attempt::Retry(format!("HTTP {}: {}", r.status, r.body)),
                Ok(r) if is_context_overflow(r.status, &r.body) => {
                    Attempt::Done(Err(GenError::BudgetExceededByServer(r.body)))
                }
                Ok(r) => Attempt::Done(Err(GenError::Remote(format!("HTTP {}: {}", r.status, r.body)))),
            });
        let body = result.map_err(|detail| GenError::RemoteUnavailable { attempts, detail })??;
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| GenError::Remote(format!("bad response: {e}")))?;
        let summary = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        if summary.is_empty() {
            return Err(GenError::EmptyCompletion);
        }
        Ok(GenerationResult {
            summary,
            model_id: self.cfg.model.clone(),
            prompt_tokens_est: spec.prompt_tokens_est,
            latency_ms: started.elapsed().as_millis() as u64,
            attempts,
        })
    }
}

/// Offline stand-in for a chat model: returns the first `words` words of the
/// prompt's document text. Deterministic, no network.
#[derive(Debug, Clone)]
pub struct LeadGenerator {
    pub words: usize,
}

impl Default for LeadGenerator {
    fn default() -> Self {
        Self { words: 60 }
    }
}

impl Generator for LeadGenerator {
    fn model_id(&self) -> String {
        format!("offline-lead-{}", self.words)
    }

    fn generate(&self, spec: &PromptSpec) -> Result<GenerationResult, GenError> {
        let summary = spec.document_text.split_whitespace().take(self.words).collect::<Vec<_>>().join(" ");
        if summary.is_empty() {
            return Err(GenError::EmptyCompletion);
        }
        Ok(GenerationResult {
            summary,
            model_id: self.model_id(),
            prompt_tokens_est: spec.prompt_tokens_est,
            latency_ms: 0,
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_detection() {
        assert!(is_context_overflow(400, r#"{"error":{"code":"context_length_exceeded"}}"#));
        assert!(is_context_overflow(400, "This model's maximum context length is 4096 tokens"));
        assert!(!is_context_overflow(400, "invalid model"));
        assert!(!is_context_overflow(500, "context length"));
    }

    #[test]
    fn lead_generator_takes_prefix() {
        let spec = crate::promptgen::PromptBuilder::default().build(None, "one two three four", "x").unwrap();
        let g = LeadGenerator { words: 2 };
        assert_eq!(g.generate(&spec).unwrap().summary, "one two");
        let empty = crate::promptgen::PromptBuilder::default().build(None, "", "x").unwrap();
        assert_eq!(g.generate(&empty), Err(GenError::EmptyCompletion));
    }
}
