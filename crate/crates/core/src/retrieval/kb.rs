use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Access,
    Preprocess,
    Visualize,
}

impl IndexKind {
    /// Retrieval order when enhancing a prompt.
    pub const ALL: [IndexKind; 3] = [IndexKind::Access, IndexKind::Preprocess, IndexKind::Visualize];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Access => "access",
            IndexKind::Preprocess => "preprocess",
            IndexKind::Visualize => "visualize",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One curated example: a title, a short description, and a code snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBaseEntry {
    pub id: String,
    #[serde(rename = "index")]
    pub index_kind: IndexKind,
    pub title: String,
    pub description: String,
    pub code: String,
}

impl KnowledgeBaseEntry {
    /// Text that gets embedded. Code is left out.
    pub fn embedding_text(&self) -> String {
        format!("{} {}", self.title, self.description)
    }

    fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("id", &self.id),
            ("title", &self.title),
            ("description", &self.description),
            ("code", &self.code),
        ] {
            if value.trim().is_empty() {
                return Err(format!("entry {:?} has an empty {name}", self.id));
            }
        }
        Ok(())
    }
}

/// Checks per-entry fields and id uniqueness across the whole list.
pub fn validate_entries(entries: &[KnowledgeBaseEntry]) -> Result<(), RetrievalError> {
    let mut ids = HashSet::new();
    for e in entries {
        e.validate().map_err(RetrievalError::InvalidEntry)?;
        if !ids.insert(e.id.as_str()) {
            return Err(RetrievalError::InvalidEntry(format!("duplicate id {:?}", e.id)));
        }
    }
    Ok(())
}

/// Parses a JSON Lines knowledge base. Blank lines are ignored.
pub fn parse_kb(text: &str) -> Result<Vec<KnowledgeBaseEntry>, RetrievalError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: KnowledgeBaseEntry = serde_json::from_str(line).map_err(|e| RetrievalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    validate_entries(&entries)?;
    Ok(entries)
}

pub fn load_kb(path: &Path) -> Result<Vec<KnowledgeBaseEntry>, RetrievalError> {
    let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
    parse_kb(&text)
}
