//! Querying a model over benchmark items, with a content-addressed response
//! cache so interrupted runs resume where they stopped.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::items::TaskItem;
use super::BenchError;
use crate::client::{complete, fan_out, ChatClient, ChatClientConfig, RetryPolicy};
use crate::prompt::TemplateSet;

/// On-disk cache of successful responses, one JSON file per
/// (model, item id, prompt).
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    id: String,
    content: String,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BenchError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn key(model: &str, id: &str, prompt: &str) -> String {
        let mut h = Sha256::new();
        for part in [model, id, prompt] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, model: &str, id: &str, prompt: &str) -> Option<String> {
        let path = self.path(&Self::key(model, id, prompt));
        let bytes = fs::read(path).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.model == model && entry.id == id).then_some(entry.content)
    }

    /// Writes through a temporary file so readers never see a partial entry.
    pub fn put(&self, model: &str, id: &str, prompt: &str, content: &str) -> Result<(), BenchError> {
        let key = Self::key(model, id, prompt);
        let path = self.path(&key);
        let parent = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
        let entry = CacheEntry {
            model: model.to_owned(),
            id: id.to_owned(),
            content: content.to_owned(),
        };
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&entry).expect("cache entries serialize"))
            .map_err(|e| BenchError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| BenchError::io(&path, e))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Outcome of one item. Latency and attempt counts are operational detail
/// and stay out of evaluation results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub id: String,
    /// `None` when every attempt failed.
    pub content: Option<String>,
    pub attempts: u32,
    pub latency_ms: u64,
    pub cached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ModelResponse {
    pub fn retries(&self) -> u32 {
        self.attempts.saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub temperature: f64,
    pub max_tokens: u32,
    pub cache: Option<ResponseCache>,
    pub templates: TemplateSet,
}

impl Default for RunOptions {
    fn default() -> Self {
        let c = ChatClientConfig::default();
        Self {
            parallelism: c.parallelism,
            retry: c.retry,
            temperature: c.temperature,
            max_tokens: c.max_tokens,
            cache: None,
            templates: TemplateSet::builtin(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub cache_hits: usize,
    pub answered: usize,
    pub unanswered: usize,
    pub retries: u64,
    /// Requests actually sent, failed attempts included.
    pub requests: u64,
}

pub fn summarize(responses: &[ModelResponse]) -> RunSummary {
    let mut s = RunSummary::default();
    for r in responses {
        s.cache_hits += r.cached as usize;
        if r.content.is_some() {
            s.answered += 1;
        } else {
            s.unanswered += 1;
        }
        s.retries += r.retries() as u64;
        s.requests += r.attempts as u64;
    }
    s
}

/// One response per item, in item order. Items whose retries run out are
/// returned unanswered rather than failing the run.
pub fn run_model(items: &[TaskItem], client: &dyn ChatClient, opts: &RunOptions) -> Vec<ModelResponse> {
    let model = client.model().to_owned();
    fan_out(items, opts.parallelism, |item| {
        let prompt = opts.templates.answer_prompt(&item.instruction, &item.input);
        if let Some(content) = opts.cache.as_ref().and_then(|c| c.get(&model, &item.id, &prompt)) {
            return ModelResponse {
                id: item.id.clone(),
                content: Some(content),
                attempts: 0,
                latency_ms: 0,
                cached: true,
                error: None,
            };
        }
        let request = ChatClientConfig {
            model: model.clone(),
            temperature: opts.temperature,
            max_tokens: opts.max_tokens,
            ..Default::default()
        }
        .request(&prompt);
        match complete(client, &request, &opts.retry) {
            Ok(c) => {
                if let Some(cache) = &opts.cache {
                    if let Err(e) = cache.put(&model, &item.id, &prompt, &c.content) {
                        log::warn!("cache write for {} failed: {e}", item.id);
                    }
                }
                ModelResponse {
                    id: item.id.clone(),
                    content: Some(c.content),
                    attempts: c.attempts,
                    latency_ms: c.latency.as_millis() as u64,
                    cached: false,
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("{model}: item {} unanswered: {e}", item.id);
                let attempts = match &e {
                    crate::client::ClientError::Exhausted { attempts, .. } => *attempts,
                    _ => 1,
                };
                ModelResponse {
                    id: item.id.clone(),
                    content: None,
                    attempts,
                    latency_ms: 0,
                    cached: false,
                    error: Some(e.to_string()),
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::items::parse_item;
    use crate::client::{ClientError, MockChatClient};

    fn items() -> Vec<TaskItem> {
        [
            r#"{"id":"a","task":"translation","instruction":"翻译","input":"学而时习之","gold":"学习"}"#,
            r#"{"id":"b","task":"reverse_dictionary","instruction":"词","input":"海棠花的颜色","gold":"晕红"}"#,
        ]
        .iter()
        .map(|l| parse_item(l).unwrap())
        .collect()
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            cache: Some(ResponseCache::open(dir.path()).unwrap()),
            retry: RetryPolicy::no_wait(2),
            ..Default::default()
        };
        let client = MockChatClient::new("m", |r| Ok(format!("echo {}", r.prompt().len())));
        let first = run_model(&items(), &client, &opts);
        assert_eq!(client.calls(), 2);
        assert!(first.iter().all(|r| !r.cached && r.content.is_some()));

        let again = MockChatClient::new("m", |_| Ok("different".into()));
        let second = run_model(&items(), &again, &opts);
        assert_eq!(again.calls(), 0);
        assert!(second.iter().all(|r| r.cached));
        assert_eq!(
            first.iter().map(|r| &r.content).collect::<Vec<_>>(),
            second.iter().map(|r| &r.content).collect::<Vec<_>>()
        );

        // another model does not share entries
        let other = MockChatClient::new("n", |_| Ok("x".into()));
        run_model(&items(), &other, &opts);
        assert_eq!(other.calls(), 2);
    }

    #[test]
    fn retry_then_success() {
        let client = MockChatClient::new("m", |_| Ok("ok".into())).failing_first(1);
        let opts = RunOptions {
            retry: RetryPolicy::no_wait(3),
            ..Default::default()
        };
        let out = run_model(&items()[..1], &client, &opts);
        assert_eq!(out[0].content.as_deref(), Some("ok"));
        assert_eq!(out[0].retries(), 1);
    }

    #[test]
    fn permanent_failure_is_unanswered_and_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            cache: Some(ResponseCache::open(dir.path()).unwrap()),
            retry: RetryPolicy::no_wait(2),
            ..Default::default()
        };
        let client = MockChatClient::new("m", |_| Err(ClientError::Status {
            status: 503,
            body: "down".into(),
        }));
        let out = run_model(&items(), &client, &opts);
        assert!(out.iter().all(|r| r.content.is_none() && r.error.is_some()));
        assert_eq!(summarize(&out).unanswered, 2);
        assert_eq!(client.calls(), 4);
        let ok = MockChatClient::new("m", |_| Ok("ok".into()));
        run_model(&items(), &ok, &opts);
        assert_eq!(ok.calls(), 2);
    }

    #[test]
    fn cache_key_separates_fields() {
        assert_ne!(ResponseCache::key("ab", "c", "p"), ResponseCache::key("a", "bc", "p"));
    }
}
