//! Scripted stand-in for the model server.
//!
//! [`MockModel`] answers chat requests from an ordered rule list and embeds
//! text with a [`HashEmbedder`]. [`MockServer`] exposes the same model over
//! HTTP with the wire shape [`HttpGateway`](super::HttpGateway) speaks.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tiny_http::{Header, Method, Response, Server};

use super::{ChatRequest, GatewayError, ModelGateway};
use crate::embedding::{Embedder, EmbeddingVector, HashEmbedder, DEFAULT_EMBEDDING_DIM};

/// A reply rule. The first rule whose condition holds for the prompt wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockRule {
    /// Hex SHA-256 of the final user message.
    Sha256 { sha256: String, reply: String },
    Contains { contains: String, reply: String },
    /// Prompt contains every needle.
    ContainsAll { contains_all: Vec<String>, reply: String },
}

impl MockRule {
    fn reply_for(&self, prompt: &str, digest: &str) -> Option<&str> {
        match self {
            MockRule::Sha256 { sha256, reply } => sha256.eq_ignore_ascii_case(digest).then_some(reply),
            MockRule::Contains { contains, reply } => prompt.contains(contains.as_str()).then_some(reply),
            MockRule::ContainsAll { contains_all, reply } => contains_all
                .iter()
                .all(|n| prompt.contains(n.as_str()))
                .then_some(reply),
        }
        .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFallback {
    /// Reply with the prompt itself.
    Echo,
    Reply(String),
    /// Fail like a server that has no answer: HTTP 500.
    Error,
}

/// Mock configuration, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    /// Model names the mock answers to; empty accepts any name.
    pub models: Vec<String>,
    pub rules: Vec<MockRule>,
    pub fallback: MockFallback,
    pub embedding_dim: usize,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            rules: Vec::new(),
            fallback: MockFallback::Echo,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl MockScript {
    pub fn echo() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug)]
pub struct MockModel {
    script: MockScript,
    embedder: HashEmbedder,
    chat_calls: AtomicUsize,
}

impl MockModel {
    pub fn new(script: MockScript) -> Self {
        let embedder = HashEmbedder::new(script.embedding_dim.max(1));
        Self {
            script,
            embedder,
            chat_calls: AtomicUsize::new(0),
        }
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_calls.load(Ordering::SeqCst)
    }

    fn knows(&self, model: &str) -> bool {
        self.script.models.is_empty() || self.script.models.iter().any(|m| m == model)
    }
}

impl ModelGateway for MockModel {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        if !self.knows(&req.model) {
            return Err(GatewayError::ModelNotFound(req.model.clone()));
        }
        let prompt = req.prompt();
        let digest = prompt_sha256(prompt);
        if let Some(reply) = self.script.rules.iter().find_map(|r| r.reply_for(prompt, &digest)) {
            return Ok(reply.to_string());
        }
        match &self.script.fallback {
            MockFallback::Echo => Ok(prompt.to_string()),
            MockFallback::Reply(r) => Ok(r.clone()),
            MockFallback::Error => Err(GatewayError::Http {
                status: 500,
                body: format!("no scripted reply for prompt {digest}"),
            }),
        }
    }
}

impl Embedder for MockModel {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        self.embedder.embed(text)
    }

    fn descriptor(&self) -> String {
        self.embedder.descriptor()
    }
}

/// HTTP front end for a [`MockModel`]. Stops when dropped.
pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    model: Arc<MockModel>,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds to `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(model: MockModel, addr: &str) -> std::io::Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(std::io::Error::other)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock server is not bound to an IP address"))?;
        let model = Arc::new(model);
        let worker = {
            let server = Arc::clone(&server);
            let model = Arc::clone(&model);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    handle(&model, request);
                }
            })
        };
        Ok(Self {
            server,
            addr,
            model,
            worker: Some(worker),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn model(&self) -> &MockModel {
        &self.model
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

#[derive(Deserialize)]
struct WireChat {
    model: String,
    messages: Vec<super::ChatMessage>,
    #[serde(default)]
    options: WireOptions,
}

#[derive(Deserialize, Default)]
struct WireOptions {
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireEmbed {
    model: String,
    prompt: String,
}

fn handle(model: &MockModel, mut request: tiny_http::Request) {
    let mut body = String::new();
    let (status, payload) = if request.as_reader().read_to_string(&mut body).is_err() {
        (400, json!({"error": "unreadable body"}))
    } else {
        match (request.method(), request.url()) {
            (Method::Post, "/api/chat") => serve_chat(model, &body),
            (Method::Post, "/api/embeddings") => serve_embed(model, &body),
            (Method::Get, "/api/tags") => (
                200,
                json!({"models": model.script.models.iter().map(|m| json!({"name": m})).collect::<Vec<_>>()}),
            ),
            _ => (404, json!({"error": "unknown endpoint"})),
        }
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = Response::from_string(payload.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = request.respond(response);
}

fn error_payload(err: &GatewayError) -> (u16, serde_json::Value) {
    match err {
        GatewayError::ModelNotFound(m) => (404, json!({"error": format!("model '{m}' not found")})),
        GatewayError::Http { status, body } => (*status, json!({"error": body})),
        other => (400, json!({"error": other.to_string()})),
    }
}

fn serve_chat(model: &MockModel, body: &str) -> (u16, serde_json::Value) {
    let wire: WireChat = match serde_json::from_str(body) {
        Ok(w) => w,
        Err(e) => return (400, json!({"error": e.to_string()})),
    };
    let req = ChatRequest {
        model: wire.model.clone(),
        messages: wire.messages,
        temperature: wire.options.temperature.unwrap_or(0.0),
        seed: wire.options.seed,
    };
    match model.chat(&req) {
        Ok(content) => (
            200,
            json!({"model": wire.model, "message": {"role": "assistant", "content": content}, "done": true}),
        ),
        Err(e) => error_payload(&e),
    }
}

fn serve_embed(model: &MockModel, body: &str) -> (u16, serde_json::Value) {
    let wire: WireEmbed = match serde_json::from_str(body) {
        Ok(w) => w,
        Err(e) => return (400, json!({"error": e.to_string()})),
    };
    if !model.knows(&wire.model) {
        return error_payload(&GatewayError::ModelNotFound(wire.model));
    }
    match model.embed(&wire.prompt) {
        Ok(v) => (200, json!({"embedding": v.values()})),
        Err(e) => error_payload(&e),
    }
}
