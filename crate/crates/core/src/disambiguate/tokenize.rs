use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DisambiguateError;

static SEPARATORS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^a-z0-9_]+").unwrap());

/// Cleaned prompt tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSet {
    /// Cleaned words, deduplicated, in first-occurrence order.
    pub monograms: Vec<String>,
    /// Adjacent word pairs joined by a single space, deduplicated.
    pub bigrams: Vec<String>,
    /// Slash-separated components of raw terms that contained `/`.
    pub expanded: Vec<String>,
    /// Component lists of slash-bearing terms, e.g. `/a/b` gives `[a, b]`.
    pub path_terms: Vec<Vec<String>>,
    /// Cleaned words in prompt order, duplicates kept.
    pub sequence: Vec<String>,
}

/// Lowercases and splits on anything outside `[a-z0-9_]`.
pub fn clean_words(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    SEPARATORS
        .split(&lower)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn tokenize(prompt: &str) -> Result<TokenSet, DisambiguateError> {
    if prompt.trim().is_empty() {
        return Err(DisambiguateError::EmptyPrompt);
    }
    let sequence = clean_words(prompt);
    let monograms = dedup(sequence.iter().cloned());
    let bigrams = dedup(sequence.windows(2).map(|w| format!("{} {}", w[0], w[1])));

    let mut expanded = Vec::new();
    let mut path_terms = Vec::new();
    for term in prompt.split_whitespace().filter(|t| t.contains('/')) {
        let components: Vec<String> = term
            .split('/')
            .flat_map(clean_words)
            .collect();
        if components.is_empty() {
            continue;
        }
        expanded.extend(components.iter().cloned());
        if !path_terms.contains(&components) {
            path_terms.push(components);
        }
    }
    Ok(TokenSet {
        monograms,
        bigrams,
        expanded: dedup(expanded),
        path_terms,
        sequence,
    })
}

fn dedup(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|t| seen.insert(t.clone())).collect()
}
