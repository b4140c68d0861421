//! Retrieval of curated code examples.
//!
//! The knowledge base holds three kinds of examples (data access,
//! preprocessing, visualization). A prompt is split into one sub-query per
//! kind, and the single closest example of each kind is appended to it.

mod enhance;
mod index;
mod intent;
mod kb;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use enhance::{enhance_prompt, EnhancedPrompt, RetrievedExample, REFERENCE_HEADER};
pub use index::{build_index, KnowledgeIndexes, VectorIndex};
pub use intent::{decompose_intent, parse_intent_reply, IntentTriple, DEFAULT_INTENT_TEMPLATE};
pub use kb::{load_kb, parse_kb, validate_entries, IndexKind, KnowledgeBaseEntry};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("knowledge base line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid knowledge base entry: {0}")]
    InvalidEntry(String),
    #[error("knowledge base has no entries")]
    EmptyKnowledgeBase,
    #[error("the {0} index is empty")]
    EmptyIndex(IndexKind),
    #[error("embedding dimension mismatch: index has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero embedding vector for {0}")]
    ZeroVector(String),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(#[source] GatewayError),
    #[error("index was built with embedder {index} but queries use {query}")]
    EmbedderMismatch { index: String, query: String },
    #[error("{0}")]
    Io(String),
}
