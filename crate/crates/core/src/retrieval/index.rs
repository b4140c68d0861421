use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kb::{validate_entries, IndexKind, KnowledgeBaseEntry};
use super::RetrievalError;
use crate::embedding::{Embedder, EmbeddingVector};

const FORMAT_VERSION: u32 = 1;

/// Exhaustive cosine-similarity index over one kind of example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    kind: IndexKind,
    dim: usize,
    entries: Vec<KnowledgeBaseEntry>,
    vectors: Vec<EmbeddingVector>,
    norms: Vec<f64>,
}

impl VectorIndex {
    pub fn new(kind: IndexKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            entries: Vec::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: KnowledgeBaseEntry, vector: EmbeddingVector) -> Result<(), RetrievalError> {
        if vector.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                found: vector.dim(),
            });
        }
        let norm = vector.norm();
        if norm == 0.0 {
            return Err(RetrievalError::ZeroVector(entry.id));
        }
        self.entries.push(entry);
        self.vectors.push(vector);
        self.norms.push(norm);
        Ok(())
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[KnowledgeBaseEntry] {
        &self.entries
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    /// Highest cosine similarity; the earliest entry wins ties.
    pub fn cosine_top1(&self, query: &EmbeddingVector) -> Result<(&KnowledgeBaseEntry, f64), RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex(self.kind));
        }
        if query.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        let qn = query.norm();
        if qn == 0.0 {
            return Err(RetrievalError::ZeroVector("query".into()));
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (v, n)) in self.vectors.iter().zip(&self.norms).enumerate() {
            let score = query.dot(v) / (qn * n);
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        Ok((&self.entries[best], best_score.clamp(-1.0, 1.0)))
    }
}

/// The three example indexes plus the identity of the embedder that built them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeIndexes {
    version: u32,
    embedder: String,
    dim: usize,
    indexes: BTreeMap<IndexKind, VectorIndex>,
}

impl KnowledgeIndexes {
    pub fn embedder(&self) -> &str {
        &self.embedder
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, kind: IndexKind) -> &VectorIndex {
        &self.indexes[&kind]
    }

    pub fn total_entries(&self) -> usize {
        self.indexes.values().map(VectorIndex::len).sum()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let file = std::fs::File::create(path).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
        bincode::serialize_into(BufWriter::new(file), self).map_err(|e| RetrievalError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        use bincode::Options;

        let io = |e: &dyn std::fmt::Display| RetrievalError::Io(format!("{}: {e}", path.display()));
        let file = std::fs::File::open(path).map_err(|e| io(&e))?;
        let len = file.metadata().map_err(|e| io(&e))?.len();
        // a corrupt length prefix must not turn into a huge allocation
        let idx: Self = bincode::DefaultOptions::new()
            .with_fixint_encoding()
            .with_limit(len)
            .deserialize_from(BufReader::new(file))
            .map_err(|e| io(&e))?;
        if idx.version != FORMAT_VERSION {
            return Err(RetrievalError::Io(format!(
                "{}: unsupported index format version {}",
                path.display(),
                idx.version
            )));
        }
        Ok(idx)
    }
}

/// Embeds every entry's title and description and partitions the entries by
/// kind, preserving their order.
pub fn build_index(entries: &[KnowledgeBaseEntry], embedder: &dyn Embedder) -> Result<KnowledgeIndexes, RetrievalError> {
    validate_entries(entries)?;
    let mut dim = None;
    let mut indexes: BTreeMap<IndexKind, VectorIndex> = BTreeMap::new();
    for entry in entries {
        let vector = embedder
            .embed(&entry.embedding_text())
            .map_err(RetrievalError::EmbedderUnavailable)?;
        let d = *dim.get_or_insert(vector.dim());
        indexes
            .entry(entry.index_kind)
            .or_insert_with(|| VectorIndex::new(entry.index_kind, d))
            .push(entry.clone(), vector)?;
    }
    let dim = dim.ok_or(RetrievalError::EmptyKnowledgeBase)?;
    for kind in IndexKind::ALL {
        indexes.entry(kind).or_insert_with(|| VectorIndex::new(kind, dim));
    }
    Ok(KnowledgeIndexes {
        version: FORMAT_VERSION,
        embedder: embedder.descriptor(),
        dim,
        indexes,
    })
}
