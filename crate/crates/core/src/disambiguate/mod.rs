//! Data-aware prompt disambiguation.
//!
//! Vague dataset references in a prompt ("the temperature data") are resolved
//! against the real file hierarchy and the resolved paths, with their
//! attribute names, are appended to the prompt. The pipeline is
//! [`tokenize`] → [`match_tokens`] → [`rank_matches`] → [`augment_prompt`].

mod augment;
mod matching;
mod similarity;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::SchemaIndex;

pub use augment::{augment_prompt, AugmentedPrompt, FALLBACK_HEADER, MATCHED_HEADER};
pub use matching::{match_tokens, rank_matches, FuzzyPass, MatchKind, MatchResult};
pub use similarity::{fuzzy_similarity, levenshtein};
pub use tokenize::{clean_words, tokenize, TokenSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DisambiguateError {
    #[error("prompt has no usable tokens")]
    EmptyPrompt,
    #[error("schema has no datasets or groups to match against")]
    EmptySchema,
}

pub const DEFAULT_STOP_TOKENS: &[&str] = &[
    "the", "a", "an", "of", "to", "and", "data", "file", "plot", "show", "visualize", "generate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisambiguateConfig {
    pub strict_threshold: f64,
    pub relaxed_threshold: f64,
    pub max_context_entries: usize,
    /// Tokens skipped during matching. They stay in the prompt.
    pub stop_tokens: Vec<String>,
    /// Shortest token allowed to match as a substring of a name.
    pub min_partial_len: usize,
}

impl Default for DisambiguateConfig {
    fn default() -> Self {
        Self {
            strict_threshold: 87.0,
            relaxed_threshold: 80.0,
            max_context_entries: 5,
            stop_tokens: DEFAULT_STOP_TOKENS.iter().map(|s| s.to_string()).collect(),
            min_partial_len: 3,
        }
    }
}

/// Full disambiguation of one prompt against one schema.
pub fn disambiguate(
    prompt: &str,
    schema: &SchemaIndex,
    cfg: &DisambiguateConfig,
) -> Result<(AugmentedPrompt, Vec<MatchResult>), DisambiguateError> {
    let tokens = tokenize(prompt)?;
    let ranked = rank_matches(match_tokens(&tokens, schema, cfg)?);
    let augmented = augment_prompt(prompt, &ranked, schema, cfg);
    Ok((augmented, ranked))
}
