use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::matching::{MatchKind, MatchResult};
use super::DisambiguateConfig;
use crate::schema::{DatasetEntry, SchemaIndex};

pub const MATCHED_HEADER: &str = "Dataset context (from the file):";
pub const FALLBACK_HEADER: &str = "Datasets available in the file:";

/// A prompt with a context block appended after one blank line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPrompt {
    pub original: String,
    pub context_block: String,
    pub matches_used: Vec<MatchResult>,
}

impl AugmentedPrompt {
    pub fn render(&self) -> String {
        format!("{}\n\n{}", self.original, self.context_block)
    }
}

fn context_line(ds: &DatasetEntry) -> String {
    let names: Vec<&str> = ds.attribute_names().collect();
    if names.is_empty() {
        format!("- {} (no attributes)", ds.path())
    } else {
        format!("- {} (attributes: {})", ds.path(), names.join(", "))
    }
}

/// Appends dataset paths and attribute names for the top-ranked matches.
///
/// A subgroup match contributes the datasets below that group. With no
/// matches at all, the first datasets of the file are listed instead.
pub fn augment_prompt(
    prompt: &str,
    ranked: &[MatchResult],
    schema: &SchemaIndex,
    cfg: &DisambiguateConfig,
) -> AugmentedPrompt {
    let cap = cfg.max_context_entries;
    let mut lines = Vec::new();
    let mut seen = HashSet::new();
    let mut used = Vec::new();

    'outer: for m in ranked {
        let targets: Vec<&DatasetEntry> = match m.kind {
            MatchKind::Subgroup => schema.datasets_under(&m.path).collect(),
            _ => schema.dataset(&m.path).into_iter().collect(),
        };
        let mut contributed = false;
        for ds in targets {
            if lines.len() >= cap {
                if contributed {
                    used.push(m.clone());
                }
                break 'outer;
            }
            if seen.insert(ds.path()) {
                lines.push(context_line(ds));
                contributed = true;
            }
        }
        if contributed {
            used.push(m.clone());
        }
    }

    let header = if lines.is_empty() {
        lines = schema.datasets().iter().take(cap).map(context_line).collect();
        FALLBACK_HEADER
    } else {
        MATCHED_HEADER
    };
    let mut context_block = header.to_string();
    for l in &lines {
        context_block.push('\n');
        context_block.push_str(l);
    }
    AugmentedPrompt {
        original: prompt.to_string(),
        context_block,
        matches_used: used,
    }
}
