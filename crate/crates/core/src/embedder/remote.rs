use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingBackend};
use crate::http::{endpoint, env_token, JsonClient};
use crate::retry::{with_retries, Attempt, RetryPolicy};

pub const EMBED_API_KEY_VAR: &str = "EMBED_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEmbeddingConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    /// Longest text the service accepts, in characters.
    pub max_input_chars: usize,
    pub retry: RetryPolicy,
}

impl Default for RemoteEmbeddingConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/v1".into(),
            model: "text-embedding".into(),
            timeout_secs: 60,
            max_input_chars: 32_000,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Client for an OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteBackend {
    cfg: RemoteEmbeddingConfig,
    client: JsonClient,
    token: Option<String>,
    id: String,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteEmbeddingConfig) -> Self {
        let client = JsonClient::new(Duration::from_secs(cfg.timeout_secs));
        let id = format!("remote:{}@{}", cfg.model, cfg.base_url.trim_end_matches('/'));
        Self { token: env_token(EMBED_API_KEY_VAR), client, id, cfg }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }
}

impl EmbeddingBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn max_input_chars(&self) -> usize {
        self.cfg.max_input_chars
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let url = endpoint(&self.cfg.base_url, "embeddings");
        let body = EmbeddingsRequest { model: &self.cfg.model, input: texts };
        let (result, attempts) =
            with_retries(&self.cfg.retry, |_| match self.client.post_json(&url, self.token.as_deref(), &body) {
                Err(e) => Attempt::Retry(EmbedError::RemoteUnavailable { attempts: 0, detail: e }),
                Ok(r) if r.is_success() => Attempt::Done(r.body),
                Ok(r) if r.is_retryable() => Attempt::Retry(EmbedError::RemoteUnavailable {
                    attempts: 0,
                    detail: format!("HTTP {}: {}", r.status, r.body),
                }),
                Ok(r) => Attempt::Fail(EmbedError::Remote(format!("HTTP {}: {}", r.status, r.body))),
            });
        let body = result.map_err(|e| match e {
            EmbedError::RemoteUnavailable { detail, .. } => EmbedError::RemoteUnavailable { attempts, detail },
            other => other,
        })?;
        let mut parsed: EmbeddingsResponse =
            serde_json::from_str(&body).map_err(|e| EmbedError::Remote(format!("bad response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Remote(format!("expected {} embeddings, got {}", texts.len(), parsed.data.len())));
        }
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}
