//! Text embeddings: the vector type, the embedder interface, and a
//! deterministic hash-projection embedder for offline use.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disambiguate::clean_words;
use crate::gateway::GatewayError;

/// Default dimension, that of the MiniLM-L6 sentence encoder family.
pub const DEFAULT_EMBEDDING_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f32>);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VectorError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding has a non-finite value at position {0}")]
    NonFinite(usize),
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }
}

/// Maps text to a fixed-dimension vector.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError>;

    /// Identifies the embedding space, e.g. `hash:384` or `server:all-minilm`.
    fn descriptor(&self) -> String;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        (**self).embed(text)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Feature-hashing embedder: every cleaned word adds ±1 at four hashed
/// positions. Texts sharing words get positive cosine similarity.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn add_feature(&self, values: &mut [f32], feature: &str) {
        let digest = Sha256::digest(feature.as_bytes());
        for k in 0..4 {
            let bytes = [digest[4 * k], digest[4 * k + 1], digest[4 * k + 2], digest[4 * k + 3]];
            let idx = u32::from_le_bytes(bytes) as usize % self.dim;
            let sign = if digest[16 + k] & 1 == 0 { 1.0 } else { -1.0 };
            values[idx] += sign;
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText);
        }
        let mut values = vec![0.0f32; self.dim];
        let words = clean_words(text);
        if words.is_empty() {
            self.add_feature(&mut values, text);
        }
        for w in &words {
            self.add_feature(&mut values, w);
        }
        if values.iter().all(|v| *v == 0.0) {
            // features cancelled out
            let digest = Sha256::digest(text.as_bytes());
            values[digest[0] as usize % self.dim] = 1.0;
        }
        Ok(EmbeddingVector(values))
    }

    fn descriptor(&self) -> String {
        format!("hash:{}", self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_vectors() {
        assert_eq!(EmbeddingVector::new(vec![]), Err(VectorError::Empty));
        assert_eq!(
            EmbeddingVector::new(vec![0.0, f32::NAN]),
            Err(VectorError::NonFinite(1))
        );
    }

    #[test]
    fn hash_embedder_is_deterministic() {
        let e = HashEmbedder::default();
        let a = e.embed("temperature").unwrap();
        assert_eq!(a, e.embed("temperature").unwrap());
        assert_eq!(a.dim(), 384);
        assert!(a.norm() > 0.0);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(HashEmbedder::new(8).embed("  "), Err(GatewayError::EmptyText));
    }

    #[test]
    fn shared_words_raise_similarity() {
        let e = HashEmbedder::new(256);
        let q = e.embed("read the sea surface temperature grid").unwrap();
        let near = e.embed("sea surface temperature grid access").unwrap();
        let far = e.embed("histogram of image intensities").unwrap();
        let cos = |a: &EmbeddingVector, b: &EmbeddingVector| a.dot(b) / (a.norm() * b.norm());
        assert!(cos(&q, &near) > cos(&q, &far));
    }
}
