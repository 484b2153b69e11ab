//! Minimal blocking JSON-over-HTTP client shared by the embedding and chat
//! backends.

use std::time::Duration;

use serde::Serialize;

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        self.status == 429 || self.status >= 500
    }
}

#[derive(Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
}

impl JsonClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        Self { agent: ureq::Agent::new_with_config(config) }
    }

    /// POSTs `body` as JSON. Transport failures (refused connection, timeout,
    /// malformed response) come back as `Err` with a description.
    pub fn post_json<B: Serialize>(&self, url: &str, bearer: Option<&str>, body: &B) -> Result<HttpResponse, String> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Joins a base URL and a path without doubling slashes.
pub fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

/// Reads a bearer token from the environment, ignoring empty values.
pub fn env_token(var: &str) -> Option<String> {
    std::env::var(var).ok().filter(|v| !v.trim().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_joins() {
        assert_eq!(endpoint("http://h:1/v1/", "/embeddings"), "http://h:1/v1/embeddings");
        assert_eq!(endpoint("http://h:1/v1", "chat/completions"), "http://h:1/v1/chat/completions");
    }
}
