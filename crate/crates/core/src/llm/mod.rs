//! Chat-completion backends.
//!
//! [`LlmClient`] wraps a [`Backend`] with an on-disk response cache, a retry
//! policy and an optional per-worker minimum request interval. Two backends
//! ship with the crate: [`HttpBackend`] for OpenAI-style endpoints and
//! [`MockBackend`], a pure function of the request used for offline runs.

mod cache;
mod http;
mod mock;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::thread::{self, ThreadId};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheEntry, ResponseCache};
pub use http::{HttpBackend, API_KEY_ENV};
pub use mock::MockBackend;

use crate::prompt::{ChatMessage, Role};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failed after {} attempts: {}", .attempts.len(), .attempts.join("; "))]
    Exhausted { attempts: Vec<String> },
    #[error("API returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed API response: {0}")]
    Malformed(String),
    #[error("empty completion for request {digest}")]
    EmptyCompletion { digest: String },
    #[error("cache error: {0}")]
    Cache(String),
}

/// Failure of a single backend call, before retry handling.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { code, .. } => *code == 429 || *code >= 500,
            BackendError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    /// Extra body parameters. Empty by default so the provider's defaults apply.
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        CompletionRequest {
            model_id: model_id.into(),
            messages,
            params: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.last() {
            Some(m) if m.role == Role::User => Ok(()),
            Some(_) => Err(LlmError::InvalidRequest("last message must have role user".into())),
            None => Err(LlmError::InvalidRequest("no messages".into())),
        }
    }

    /// Canonical byte serialization hashed into the request digest:
    /// `model_id GS messages GS params`, where messages are `role LF content`
    /// joined by RS and params are `key=json(value)` in key order joined by RS.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        const GS: char = '\u{1d}';
        const RS: &str = "\u{1e}";
        let mut out = String::new();
        out.push_str(&self.model_id);
        out.push(GS);
        let messages: Vec<String> = self
            .messages
            .iter()
            .map(|m| format!("{}\n{}", m.role.as_str(), m.content))
            .collect();
        out.push_str(&messages.join(RS));
        out.push(GS);
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                format!("{k}={v}")
            })
            .collect();
        out.push_str(&params.join(RS));
        out.into_bytes()
    }

    /// Lower-case hex SHA-256 of [`canonical_bytes`](Self::canonical_bytes).
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    pub fn final_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub content: String,
    pub request_digest: String,
    pub backend: BackendKind,
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Performs one call. `digest` is the request digest, precomputed.
    fn call(&self, request: &CompletionRequest, digest: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(rename = "base_backoff_ms", with = "duration_ms")]
    pub base_backoff: Duration,
    pub backoff_factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_backoff: Duration::from_secs(1),
            backoff_factor: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_attempts == 0 {
            return Err(LlmError::InvalidRequest("max_attempts must be >= 1".into()));
        }
        if self.backoff_factor.is_nan() || self.backoff_factor < 1.0 {
            return Err(LlmError::InvalidRequest("backoff_factor must be >= 1".into()));
        }
        Ok(())
    }

    /// Wait after failed attempt `attempt` (1-based): base · factor^(attempt−1).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1) as i32;
        self.base_backoff.mul_f64(self.backoff_factor.powi(exp))
    }
}

pub(crate) mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Enforces a minimum interval between backend calls issued by the same thread.
#[derive(Default)]
struct RateLimiter {
    min_interval: Duration,
    last: Mutex<HashMap<ThreadId, Instant>>,
}

impl RateLimiter {
    fn wait(&self, sleep: &Sleeper) {
        if self.min_interval.is_zero() {
            return;
        }
        let id = thread::current().id();
        let pending = {
            let last = self.last.lock().expect("rate limiter poisoned");
            last.get(&id)
                .map(|t| self.min_interval.saturating_sub(t.elapsed()))
                .unwrap_or_default()
        };
        if !pending.is_zero() {
            sleep(pending);
        }
        self.last
            .lock()
            .expect("rate limiter poisoned")
            .insert(id, Instant::now());
    }
}

pub struct LlmClient {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    limiter: RateLimiter,
    sleeper: Sleeper,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        LlmClient {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::default(),
            sleeper: Arc::new(thread::sleep),
        }
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(MockBackend))
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.limiter.min_interval = interval;
        self
    }

    /// Replaces `thread::sleep` for backoff and rate-limit waits.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        request.validate()?;
        self.retry.validate()?;
        let digest = request.digest();

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&digest)? {
                return Ok(CompletionResult {
                    content: entry.content,
                    request_digest: digest,
                    backend: BackendKind::Cache,
                });
            }
        }

        let content = self.call_with_retry(request, &digest)?;
        if content.trim().is_empty() {
            return Err(LlmError::EmptyCompletion { digest });
        }
        if let Some(cache) = &self.cache {
            cache.put(&digest, request, &content, self.backend.kind())?;
        }
        Ok(CompletionResult {
            content,
            request_digest: digest,
            backend: self.backend.kind(),
        })
    }

    fn call_with_retry(&self, request: &CompletionRequest, digest: &str) -> Result<String, LlmError> {
        let mut log = Vec::new();
        for attempt in 1..=self.retry.max_attempts {
            self.limiter.wait(&self.sleeper);
            match self.backend.call(request, digest) {
                Ok(content) => return Ok(content),
                Err(err) if err.retryable() => {
                    log::debug!("attempt {attempt} for {digest} failed: {err}");
                    log.push(format!("attempt {attempt}: {err}"));
                    if attempt < self.retry.max_attempts {
                        (self.sleeper)(self.retry.backoff(attempt));
                    }
                }
                Err(BackendError::Status { code, body }) => return Err(LlmError::Status { code, body }),
                Err(BackendError::Malformed(m)) => return Err(LlmError::Malformed(m)),
                Err(BackendError::Transport(_)) => unreachable!("transport errors are retryable"),
            }
        }
        Err(LlmError::Exhausted { attempts: log })
    }
}
