use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, GatewayError, ModelGateway};
use crate::embedding::{Embedder, EmbeddingVector};

#[derive(Debug, Clone)]
pub struct HttpGatewayOptions {
    pub base_url: String,
    /// Model used for the embeddings endpoint.
    pub embedding_model: String,
    pub request_timeout: Duration,
    /// Retries after the first attempt for transient network failures.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpGatewayOptions {
    fn default() -> Self {
        Self {
            base_url: super::DEFAULT_SERVER_URL.to_string(),
            embedding_model: "all-minilm".to_string(),
            request_timeout: Duration::from_secs(600),
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            max_in_flight: 2,
        }
    }
}

/// Client for a local model server speaking the `/api/chat` and
/// `/api/embeddings` JSON shape.
pub struct HttpGateway {
    opts: HttpGatewayOptions,
    client: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

#[derive(Deserialize)]
struct ChatReply {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbedReply {
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct ErrorReply {
    error: String,
}

enum Attempt {
    Done(Result<String, GatewayError>),
    Transient(GatewayError),
}

impl HttpGateway {
    pub fn new(opts: HttpGatewayOptions) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(opts.request_timeout)
            .pool_max_idle_per_host(0)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            opts,
            client,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        })
    }

    pub fn options(&self) -> &HttpGatewayOptions {
        &self.opts
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.opts.base_url.trim_end_matches('/'), path)
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let limit = self.opts.max_in_flight.max(1);
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= limit {
            n = self.slot_freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        SlotGuard(self)
    }

    fn post(&self, path: &str, body: &serde_json::Value, model: &str) -> Result<String, GatewayError> {
        let _slot = self.acquire();
        let url = self.endpoint(path);
        let mut backoff = self.opts.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body, model) {
                Attempt::Done(r) => return r,
                Attempt::Transient(err) if attempt >= self.opts.max_retries => return Err(err),
                Attempt::Transient(err) => {
                    tracing::warn!(%url, attempt = attempt + 1, error = %err, "retrying model server request");
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }

    fn post_once(&self, url: &str, body: &serde_json::Value, model: &str) -> Attempt {
        let resp = match self.client.post(url).json(body).send() {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(classify_transport(&e)),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(classify_transport(&e)),
        };
        if status.is_success() {
            return Attempt::Done(Ok(text));
        }
        let message = serde_json::from_str::<ErrorReply>(&text)
            .map(|e| e.error)
            .unwrap_or(text);
        let err = if status == reqwest::StatusCode::NOT_FOUND && message.contains("not found") {
            GatewayError::ModelNotFound(model.to_string())
        } else {
            GatewayError::Http { status: status.as_u16(), body: message }
        };
        match status.as_u16() {
            502..=504 => Attempt::Transient(err),
            _ => Attempt::Done(Err(err)),
        }
    }
}

struct SlotGuard<'a>(&'a HttpGateway);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.slot_freed.notify_one();
    }
}

fn classify_transport(e: &reqwest::Error) -> GatewayError {
    let msg = format!("{e:#}");
    if e.is_timeout() {
        GatewayError::Timeout(msg)
    } else if e.is_connect() {
        GatewayError::ConnectionRefused(msg)
    } else {
        GatewayError::Transport(msg)
    }
}

impl ModelGateway for HttpGateway {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let mut options = json!({ "temperature": req.temperature });
        if let Some(seed) = req.seed {
            options["seed"] = json!(seed);
        }
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "options": options,
            "stream": false,
        });
        let text = self.post("/api/chat", &body, &req.model)?;
        serde_json::from_str::<ChatReply>(&text)
            .map(|r| r.message.content)
            .map_err(|e| GatewayError::Protocol(format!("chat reply: {e}")))
    }
}

impl Embedder for HttpGateway {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::EmptyText);
        }
        let model = &self.opts.embedding_model;
        let body = json!({ "model": model, "prompt": text });
        let reply = self.post("/api/embeddings", &body, model)?;
        let parsed: EmbedReply = serde_json::from_str(&reply)
            .map_err(|e| GatewayError::Protocol(format!("embedding reply: {e}")))?;
        EmbeddingVector::new(parsed.embedding).map_err(|e| GatewayError::Protocol(e.to_string()))
    }

    fn descriptor(&self) -> String {
        format!("server:{}", self.opts.embedding_model)
    }
}
