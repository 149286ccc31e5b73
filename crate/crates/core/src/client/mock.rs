use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{ChatClient, ChatRequest, ChatResponse, ClientError};

type Responder = dyn Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync;

/// Offline chat client driven by a closure. Counts calls and can fail the
/// first few attempts of every distinct prompt with a 429, to exercise
/// retries deterministically under concurrency.
pub struct MockChatClient {
    model: String,
    respond: Box<Responder>,
    fail_first: usize,
    attempts: Mutex<HashMap<u64, usize>>,
    calls: AtomicUsize,
}

impl MockChatClient {
    pub fn new(
        model: impl Into<String>,
        respond: impl Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            model: model.into(),
            respond: Box::new(respond),
            fail_first: 0,
            attempts: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Replies from a prompt → answer table; unknown prompts get `fallback`.
    pub fn with_answers(
        model: impl Into<String>,
        answers: HashMap<String, String>,
        fallback: impl Into<String>,
    ) -> Self {
        let fallback = fallback.into();
        Self::new(model, move |req| {
            Ok(answers
                .get(req.prompt())
                .cloned()
                .unwrap_or_else(|| fallback.clone()))
        })
    }

    pub fn failing_first(mut self, n: usize) -> Self {
        self.fail_first = n;
        self
    }

    /// Number of `send` calls so far, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for MockChatClient {
    fn model(&self) -> &str {
        &self.model
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail_first > 0 {
            let mut h = DefaultHasher::new();
            request.prompt().hash(&mut h);
            let mut seen = self.attempts.lock().unwrap_or_else(|e| e.into_inner());
            let n = seen.entry(h.finish()).or_insert(0);
            *n += 1;
            if *n <= self.fail_first {
                return Err(ClientError::RateLimited);
            }
        }
        (self.respond)(request).map(|content| ChatResponse { content })
    }
}

impl std::fmt::Debug for MockChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockChatClient")
            .field("model", &self.model)
            .field("calls", &self.calls())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ChatClientConfig;

    #[test]
    fn answers_by_prompt() {
        let answers = HashMap::from([("q".to_string(), "a".to_string())]);
        let m = MockChatClient::with_answers("m", answers, "?");
        let cfg = ChatClientConfig::default();
        assert_eq!(m.send(&cfg.request("q")).unwrap().content, "a");
        assert_eq!(m.send(&cfg.request("x")).unwrap().content, "?");
        assert_eq!(m.calls(), 2);
    }
}
