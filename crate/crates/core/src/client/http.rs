use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChatClient, ChatClientConfig, ChatRequest, ChatResponse, ClientError, RetryPolicy};
use crate::metrics::{EmbeddingProvider, ProviderError};

fn bearer(env: Option<&str>) -> Result<Option<String>, ClientError> {
    match env {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| ClientError::Config(format!("environment variable {var} is not set"))),
    }
}

fn build(timeout_secs: u64) -> Result<Client, ClientError> {
    Client::builder()
        .timeout(Duration::from_secs(timeout_secs.max(1)))
        .build()
        .map_err(|e| ClientError::Config(e.to_string()))
}

fn post(
    http: &Client,
    endpoint: &str,
    key: Option<&str>,
    body: &impl Serialize,
) -> Result<String, ClientError> {
    let mut req = http.post(endpoint).json(body);
    if let Some(k) = key {
        req = req.bearer_auth(k);
    }
    let resp = req.send().map_err(|e| ClientError::Network(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp.text().map_err(|e| ClientError::Network(e.to_string()))?;
    match status {
        200..=299 => Ok(text),
        401 | 403 => Err(ClientError::Auth(text)),
        429 => Err(ClientError::RateLimited),
        _ => Err(ClientError::Status { status, body: text }),
    }
}

/// Chat endpoint speaking `{model, messages, temperature, max_tokens}` →
/// `{content}`. OpenAI-style `choices[0].message.content` is accepted too.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    config: ChatClientConfig,
    key: Option<String>,
    http: Client,
}

impl HttpChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, ClientError> {
        config.validate()?;
        if config.endpoint.is_empty() {
            return Err(ClientError::Config("endpoint is empty".into()));
        }
        let key = bearer(config.api_key_env.as_deref())?;
        let http = build(config.timeout_secs)?;
        Ok(Self { config, key, http })
    }

    pub fn config(&self) -> &ChatClientConfig {
        &self.config
    }
}

fn chat_content(body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Decode(e.to_string()))?;
    v.get("content")
        .or_else(|| v.pointer("/choices/0/message/content"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ClientError::Decode("no `content` field".into()))
}

impl ChatClient for HttpChatClient {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let body = post(&self.http, &self.config.endpoint, self.key.as_deref(), request)?;
        chat_content(&body).map(|content| ChatResponse { content })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<Vec<f64>>>,
}

/// Embedding endpoint speaking `{model, texts}` → `{vectors}` with one
/// token matrix per text.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    endpoint: String,
    model: String,
    key: Option<String>,
    retry: RetryPolicy,
    http: Client,
}

impl HttpEmbeddingProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key_env: Option<&str>,
        retry: RetryPolicy,
        timeout_secs: u64,
    ) -> Result<Self, ProviderError> {
        let cfg = |e: ClientError| ProviderError::Config(e.to_string());
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            key: bearer(api_key_env).map_err(cfg)?,
            retry,
            http: build(timeout_secs).map_err(cfg)?,
        })
    }

    fn once(&self, texts: &[&str]) -> Result<Vec<Vec<Vec<f64>>>, ClientError> {
        let body = post(
            &self.http,
            &self.endpoint,
            self.key.as_deref(),
            &EmbedRequest {
                model: &self.model,
                texts,
            },
        )?;
        let parsed: EmbedResponse =
            serde_json::from_str(&body).map_err(|e| ClientError::Decode(e.to_string()))?;
        Ok(parsed.vectors)
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<Vec<f64>>>, ProviderError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        let result = loop {
            attempt += 1;
            match self.once(texts) {
                Err(e) if e.is_retryable() && attempt < max => {
                    std::thread::sleep(self.retry.delay(attempt))
                }
                other => break other,
            }
        };
        let vectors = result.map_err(|e| match e {
            ClientError::Auth(m) => ProviderError::Auth(m),
            ClientError::Status { status, body } => ProviderError::Status { status, body },
            ClientError::Decode(m) => ProviderError::Shape(m),
            ClientError::Config(m) => ProviderError::Config(m),
            other => ProviderError::Network(other.to_string()),
        })?;
        if vectors.len() != texts.len() {
            return Err(ProviderError::Shape(format!(
                "{} texts but {} matrices",
                texts.len(),
                vectors.len()
            )));
        }
        Ok(vectors)
    }

    fn name(&self) -> &str {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serves the given (status, body) replies in order, one per connection,
    /// and sends back each request body it received.
    fn serve(replies: Vec<(u16, &'static str)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_owned();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send((String::from_utf8(buf).unwrap(), auth)).unwrap();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1"), rx)
    }

    #[test]
    fn chat_wire_format() {
        let (url, rx) = serve(vec![(200, r#"{"content":"四年/t"}"#)]);
        let client = HttpChatClient::new(ChatClientConfig {
            endpoint: url,
            model: "m1".into(),
            ..Default::default()
        })
        .unwrap();
        let r = client.send(&client.config().request("标点")).unwrap();
        assert_eq!(r.content, "四年/t");
        let (body, _) = rx.recv().unwrap();
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["model"], "m1");
        assert_eq!(v["messages"][0]["role"], "user");
        assert_eq!(v["messages"][0]["content"], "标点");
        assert_eq!(v["max_tokens"], 1024);
    }

    #[test]
    fn status_mapping_and_openai_fallback() {
        let (url, _rx) = serve(vec![
            (429, "slow down"),
            (200, r#"{"choices":[{"message":{"content":"ok"}}]}"#),
            (401, "no"),
        ]);
        let client = HttpChatClient::new(ChatClientConfig {
            endpoint: url,
            model: "m".into(),
            retry: RetryPolicy::no_wait(3),
            ..Default::default()
        })
        .unwrap();
        let req = client.config().request("q");
        let c = super::super::complete(&client, &req, &client.config().retry).unwrap();
        assert_eq!((c.content.as_str(), c.retries()), ("ok", 1));
        assert!(matches!(client.send(&req), Err(ClientError::Auth(_))));
    }

    #[test]
    fn missing_key_variable_is_a_config_error() {
        let err = HttpChatClient::new(ChatClientConfig {
            endpoint: "http://127.0.0.1:9".into(),
            api_key_env: Some("GUWEN_TEST_SURELY_UNSET_KEY".into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, ClientError::Config(_)));
    }

    #[test]
    fn embedding_wire_format() {
        let (url, rx) = serve(vec![
            (200, r#"{"vectors":[[[1.0,0.0]],[[1.0,0.0],[0.0,1.0]]]}"#),
            (200, r#"{"vectors":[]}"#),
        ]);
        let p = HttpEmbeddingProvider::new(url, "bert", None, RetryPolicy::no_wait(1), 5).unwrap();
        let v = p.embed(&["甲", "甲乙"]).unwrap();
        assert_eq!(v[1].len(), 2);
        let (body, _) = rx.recv().unwrap();
        assert_eq!(body, r#"{"model":"bert","texts":["甲","甲乙"]}"#);
        assert!(matches!(p.embed(&["甲"]), Err(ProviderError::Shape(_))));
    }
}
