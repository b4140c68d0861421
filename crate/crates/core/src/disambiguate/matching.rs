use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::similarity::fuzzy_similarity;
use super::tokenize::TokenSet;
use super::{DisambiguateConfig, DisambiguateError};
use crate::schema::{components, SchemaIndex};

/// How a token matched a path, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchKind {
    ExactFullPath,
    Subgroup,
    PartialName,
    Fuzzy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzyPass {
    Strict,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub token: String,
    pub path: String,
    pub kind: MatchKind,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzzy_pass: Option<FuzzyPass>,
}

impl MatchResult {
    fn exact(token: &str, path: &str, kind: MatchKind) -> Self {
        Self {
            token: token.to_string(),
            path: path.to_string(),
            kind,
            score: 100.0,
            fuzzy_pass: None,
        }
    }
}

/// A token as it takes part in matching.
struct Candidate {
    token: String,
    /// Words of the token; for path terms, the path components.
    words: Vec<String>,
    /// Spellings compared against names: the word itself, or for multi-word
    /// tokens the words joined by `_`, ` ` and nothing.
    forms: Vec<String>,
}

impl Candidate {
    fn word(w: &str) -> Self {
        Self {
            token: w.to_string(),
            words: vec![w.to_string()],
            forms: vec![w.to_string()],
        }
    }

    fn compound(token: String, words: Vec<String>) -> Self {
        let mut forms = Vec::with_capacity(3);
        for sep in ["_", " ", ""] {
            let f = words.join(sep);
            if !forms.contains(&f) {
                forms.push(f);
            }
        }
        Self { token, words, forms }
    }

    fn bigram(b: &str) -> Self {
        Self::compound(b.to_string(), b.split(' ').map(str::to_string).collect())
    }

    fn path_term(components: &[String]) -> Self {
        Self::compound(format!("/{}", components.join("/")), components.to_vec())
    }
}

struct PreparedDataset<'a> {
    path: &'a str,
    components: Vec<String>,
    leaf: String,
}

struct PreparedGroup<'a> {
    path: &'a str,
    name: String,
}

/// Lowercases and drops characters outside `[a-z0-9_ ]`.
pub(crate) fn normalize_name(name: &str) -> String {
    name.to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '_' || *c == ' ')
        .collect()
}

struct Matcher<'a> {
    datasets: Vec<PreparedDataset<'a>>,
    groups: Vec<PreparedGroup<'a>>,
    cfg: &'a DisambiguateConfig,
}

impl<'a> Matcher<'a> {
    fn new(schema: &'a SchemaIndex, cfg: &'a DisambiguateConfig) -> Self {
        let datasets = schema
            .datasets()
            .iter()
            .map(|d| {
                let comps: Vec<String> = d.components().map(normalize_name).collect();
                PreparedDataset {
                    path: d.path(),
                    leaf: comps.last().cloned().unwrap_or_default(),
                    components: comps,
                }
            })
            .collect();
        let groups = schema
            .groups()
            .iter()
            .filter(|g| g.as_str() != "/")
            .map(|g| PreparedGroup {
                path: g.as_str(),
                name: components(g).last().map(normalize_name).unwrap_or_default(),
            })
            .collect();
        Self { datasets, groups, cfg }
    }

    /// Exact full-path, subgroup, and partial-name criteria.
    fn literal(&self, cand: &Candidate) -> Vec<MatchResult> {
        let mut out = Vec::new();
        for ds in &self.datasets {
            let full = cand.words == ds.components
                || (ds.components.len() == 1 && cand.forms.contains(&ds.leaf));
            if full {
                out.push(MatchResult::exact(&cand.token, ds.path, MatchKind::ExactFullPath));
            } else if cand.forms.iter().any(|f| {
                *f == ds.leaf
                    || (f.chars().count() >= self.cfg.min_partial_len && ds.leaf.contains(f.as_str()))
            }) {
                out.push(MatchResult::exact(&cand.token, ds.path, MatchKind::PartialName));
            }
        }
        for g in &self.groups {
            if !g.name.is_empty() && cand.forms.contains(&g.name) {
                out.push(MatchResult::exact(&cand.token, g.path, MatchKind::Subgroup));
            }
        }
        out
    }

    fn fuzzy(&self, cand: &Candidate, threshold: f64, pass: FuzzyPass) -> Vec<MatchResult> {
        self.datasets
            .iter()
            .filter_map(|ds| {
                let score = cand
                    .forms
                    .iter()
                    .map(|f| fuzzy_similarity(f, &ds.leaf))
                    .fold(0.0_f64, f64::max);
                (score >= threshold).then(|| MatchResult {
                    token: cand.token.clone(),
                    path: ds.path.to_string(),
                    kind: MatchKind::Fuzzy,
                    score,
                    fuzzy_pass: Some(pass),
                })
            })
            .collect()
    }

    /// One matching round: literal criteria first; a token that matched
    /// nothing falls through to the strict, then the relaxed fuzzy pass.
    fn round(&self, cands: &[Candidate], out: &mut BTreeMap<(String, String), MatchResult>) {
        for cand in cands {
            let mut found = self.literal(cand);
            if found.is_empty() {
                found = self.fuzzy(cand, self.cfg.strict_threshold, FuzzyPass::Strict);
            }
            if found.is_empty() {
                found = self.fuzzy(cand, self.cfg.relaxed_threshold, FuzzyPass::Relaxed);
            }
            for m in found {
                merge(out, m);
            }
        }
    }
}

/// Keeps the strongest kind per (token, path); higher score breaks ties.
fn merge(out: &mut BTreeMap<(String, String), MatchResult>, m: MatchResult) {
    let key = (m.token.clone(), m.path.clone());
    match out.get(&key) {
        Some(prev) if (prev.kind, -prev.score) <= (m.kind, -m.score) => {}
        _ => {
            out.insert(key, m);
        }
    }
}

/// Matches prompt tokens against the schema in two rounds.
///
/// Round one uses the monograms and bigrams. Round two uses the slash-expanded
/// components, path terms, and bigrams regenerated over the content words
/// with slash terms spliced in.
pub fn match_tokens(
    tokens: &TokenSet,
    schema: &SchemaIndex,
    cfg: &DisambiguateConfig,
) -> Result<Vec<MatchResult>, DisambiguateError> {
    if schema.is_empty() {
        return Err(DisambiguateError::EmptySchema);
    }
    let matcher = Matcher::new(schema, cfg);
    let is_stop = |w: &str| cfg.stop_tokens.iter().any(|s| s == w);

    let mut first: Vec<Candidate> = tokens
        .monograms
        .iter()
        .filter(|m| !is_stop(m))
        .map(|m| Candidate::word(m))
        .collect();
    first.extend(
        tokens
            .bigrams
            .iter()
            .filter(|b| !b.split(' ').all(is_stop))
            .map(|b| Candidate::bigram(b)),
    );

    let content: Vec<&String> = tokens.sequence.iter().filter(|w| !is_stop(w)).collect();
    let mut second: Vec<Candidate> = tokens
        .expanded
        .iter()
        .filter(|m| !is_stop(m))
        .map(|m| Candidate::word(m))
        .collect();
    let mut regenerated: Vec<String> = content
        .windows(2)
        .map(|w| format!("{} {}", w[0], w[1]))
        .collect();
    regenerated.dedup();
    second.extend(regenerated.iter().map(|b| Candidate::bigram(b)));
    second.extend(tokens.path_terms.iter().map(|p| Candidate::path_term(p)));

    let mut found = BTreeMap::new();
    matcher.round(&first, &mut found);
    matcher.round(&second, &mut found);
    Ok(found.into_values().collect())
}

fn compare(a: &MatchResult, b: &MatchResult) -> Ordering {
    a.kind
        .cmp(&b.kind)
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.path.cmp(&b.path))
        .then_with(|| a.token.cmp(&b.token))
}

/// Orders matches by kind, then descending score, then path.
pub fn rank_matches(mut matches: Vec<MatchResult>) -> Vec<MatchResult> {
    matches.sort_by(compare);
    matches
}
