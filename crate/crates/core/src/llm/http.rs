use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{Backend, BackendError, BackendKind, CompletionRequest};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "SENTAUG_API_KEY";

/// OpenAI-style chat-completions client.
///
/// `base_url` may be the full endpoint or an API root; in the latter case
/// `/chat/completions` is appended.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let base = base_url.trim_end_matches('/');
        let endpoint = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            endpoint,
            api_key,
            client,
        })
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, BackendError> {
        Self::new(base_url, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn request_body(request: &CompletionRequest) -> Value {
        let mut body = Map::new();
        body.insert("model".into(), json!(request.model_id));
        body.insert(
            "messages".into(),
            Value::Array(
                request
                    .messages
                    .iter()
                    .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
                    .collect(),
            ),
        );
        for (k, v) in &request.params {
            body.insert(k.clone(), v.clone());
        }
        Value::Object(body)
    }

    pub fn parse_response(body: &str) -> Result<String, BackendError> {
        let parsed: ChatResponse = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let first = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Malformed("no choices".into()))?;
        Ok(first.message.content.unwrap_or_default())
    }
}

impl Backend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn call(&self, request: &CompletionRequest, _digest: &str) -> Result<String, BackendError> {
        let mut builder = self.client.post(&self.endpoint).json(&Self::request_body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                code: status.as_u16(),
                body: text,
            });
        }
        Self::parse_response(&text)
    }
}
