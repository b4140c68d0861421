use serde::{Deserialize, Serialize};

use super::index::KnowledgeIndexes;
use super::intent::IntentTriple;
use super::kb::IndexKind;
use super::RetrievalError;
use crate::embedding::Embedder;

pub const REFERENCE_HEADER: &str = "Reference examples:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub kind: IndexKind,
    pub id: String,
    pub score: f64,
}

/// A prompt followed by retrieved reference examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancedPrompt {
    pub base: String,
    pub reference_block: String,
    pub retrieved: Vec<RetrievedExample>,
}

impl EnhancedPrompt {
    pub fn render(&self) -> String {
        if self.reference_block.is_empty() {
            self.base.clone()
        } else {
            format!("{}\n\n{}", self.base, self.reference_block)
        }
    }
}

fn label(kind: IndexKind) -> &'static str {
    match kind {
        IndexKind::Access => "data access",
        IndexKind::Preprocess => "preprocessing",
        IndexKind::Visualize => "visualization",
    }
}

/// Appends the best example from each index, in access, preprocess,
/// visualize order, to `base`.
///
/// `base` is usually the disambiguated prompt and is kept byte-for-byte.
/// With `min_score`, examples scoring below it are left out.
pub fn enhance_prompt(
    base: &str,
    triple: &IntentTriple,
    indexes: &KnowledgeIndexes,
    embedder: &dyn Embedder,
    min_score: Option<f64>,
) -> Result<EnhancedPrompt, RetrievalError> {
    if embedder.descriptor() != indexes.embedder() {
        return Err(RetrievalError::EmbedderMismatch {
            index: indexes.embedder().to_string(),
            query: embedder.descriptor(),
        });
    }
    let mut sections = Vec::new();
    let mut retrieved = Vec::new();
    for kind in IndexKind::ALL {
        let query = match kind {
            IndexKind::Access => &triple.access_query,
            IndexKind::Preprocess => &triple.preprocess_query,
            IndexKind::Visualize => &triple.visualize_query,
        };
        let vector = embedder.embed(query).map_err(RetrievalError::EmbedderUnavailable)?;
        let (entry, score) = indexes.get(kind).cosine_top1(&vector)?;
        if min_score.is_some_and(|m| score < m) {
            continue;
        }
        sections.push(format!(
            "Example {} ({}): {}\n{}\n```python\n{}\n```",
            sections.len() + 1,
            label(kind),
            entry.title.trim(),
            entry.description.trim(),
            entry.code.trim_end()
        ));
        retrieved.push(RetrievedExample { kind, id: entry.id.clone(), score });
    }
    let reference_block = if sections.is_empty() {
        String::new()
    } else {
        format!("{REFERENCE_HEADER}\n\n{}", sections.join("\n\n"))
    };
    Ok(EnhancedPrompt {
        base: base.to_string(),
        reference_block,
        retrieved,
    })
}
