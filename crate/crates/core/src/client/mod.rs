//! Chat-completion and embedding endpoints: wire types, retry policy,
//! bounded fan-out, an HTTP implementation and deterministic mocks.

mod http;
mod mock;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpChatClient, HttpEmbeddingProvider};
pub use mock::MockChatClient;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Content of the last user message, or "" if there is none.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("rate limited")]
    RateLimited,
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request failed: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("unreadable response: {0}")]
    Decode(String),
    #[error("client misconfigured: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<ClientError>,
    },
}

impl ClientError {
    /// 429, 5xx and transport failures are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::RateLimited | ClientError::Network(_) => true,
            ClientError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// One attempt per call; retries are layered on by [`complete`].
pub trait ChatClient: Send + Sync {
    fn model(&self) -> &str;

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt.
    pub backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            backoff_ms: 500,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn no_wait(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            backoff_ms: 0,
            multiplier: 1.0,
        }
    }

    /// Delay after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.backoff_ms as f64 * self.multiplier.powi(attempt as i32 - 1);
        Duration::from_millis(ms.min(60_000.0) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for ChatClientConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: 1024,
            parallelism: 4,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl ChatClientConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.parallelism < 1 {
            return Err(ClientError::Config("parallelism must be at least 1".into()));
        }
        if self.retry.max_attempts < 1 {
            return Err(ClientError::Config("retry.max_attempts must be at least 1".into()));
        }
        if self.retry.multiplier.is_nan() || self.retry.multiplier < 1.0 {
            return Err(ClientError::Config("retry.multiplier must be at least 1".into()));
        }
        Ok(())
    }

    pub fn request(&self, prompt: &str) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// A successful completion and what it took to get it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub attempts: u32,
    pub latency: Duration,
}

impl Completion {
    pub fn retries(&self) -> u32 {
        self.attempts - 1
    }
}

/// Sends `request`, retrying retryable failures with exponential backoff.
pub fn complete(
    client: &dyn ChatClient,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<Completion, ClientError> {
    let start = Instant::now();
    let max = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match client.send(request) {
            Ok(r) => {
                return Ok(Completion {
                    content: r.content,
                    attempts: attempt,
                    latency: start.elapsed(),
                })
            }
            Err(e) if e.is_retryable() && attempt < max => {
                log::debug!("attempt {attempt} for {} failed: {e}", client.model());
                std::thread::sleep(policy.delay(attempt));
            }
            Err(e) if e.is_retryable() => {
                return Err(ClientError::Exhausted {
                    attempts: attempt,
                    last: Box::new(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Maps `f` over `items` with at most `parallelism` in flight. Results come
/// back in input order.
pub fn fan_out<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}
