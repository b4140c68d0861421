//! Access to a local model server: chat completions, embeddings, and
//! extraction of runnable scripts from replies.

mod extract;
mod http;
mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, GeneratedScript, Provenance};
pub use http::{HttpGateway, HttpGatewayOptions};
pub use mock::{prompt_sha256, MockFallback, MockModel, MockRule, MockScript, MockServer};

/// Environment variable holding the model server base URL.
pub const SERVER_URL_ENV: &str = "PIPELINE_SERVER_URL";
pub const DEFAULT_SERVER_URL: &str = "http://127.0.0.1:11434";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error("model not found: {0}")]
    ModelNotFound(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed server response: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("reply contains no script")]
    EmptyReply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// Single-turn request: optional system prompt, then the user prompt.
    pub fn single_turn(model: &str, system: Option<&str>, prompt: &str) -> Self {
        let mut messages = Vec::with_capacity(2);
        if let Some(s) = system.filter(|s| !s.is_empty()) {
            messages.push(ChatMessage::system(s));
        }
        messages.push(ChatMessage::user(prompt));
        Self {
            model: model.to_string(),
            messages,
            temperature: 0.0,
            seed: Some(0),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.last() {
            None => Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::User => Err(GatewayError::InvalidRequest(
                "last message must come from the user".into(),
            )),
            _ if !(self.temperature >= 0.0 && self.temperature.is_finite()) => Err(
                GatewayError::InvalidRequest(format!("temperature {}", self.temperature)),
            ),
            _ => Ok(()),
        }
    }

    /// Content of the final user message.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }
}

/// A chat-capable model backend.
pub trait ModelGateway: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError>;
}

impl<G: ModelGateway + ?Sized> ModelGateway for &G {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(req)
    }
}

impl<G: ModelGateway + ?Sized> ModelGateway for std::sync::Arc<G> {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(req)
    }
}

pub const DEFAULT_SIMPLIFY_TEMPLATE: &str = include_str!("../../config/simplify_prompt.txt");

/// Asks the model for a short, natural-language version of a detailed prompt.
///
/// `template` must contain `{prompt}`. The reply is returned verbatim.
pub fn simplify_prompt(
    gateway: &dyn ModelGateway,
    model: &str,
    template: &str,
    detailed: &str,
) -> Result<String, GatewayError> {
    if detailed.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt);
    }
    let req = ChatRequest::single_turn(model, None, &template.replace("{prompt}", detailed));
    gateway.chat(&req)
}
