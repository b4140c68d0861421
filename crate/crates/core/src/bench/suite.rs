use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::pipeline::PromptVariant;
use crate::repair::CheckerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTask {
    pub id: String,
    /// HDF5 file or schema manifest; relative paths resolve against the
    /// suite manifest's directory.
    pub data_file: PathBuf,
    pub detailed_prompt: String,
    pub simple_prompt: String,
    pub checker: CheckerSpec,
    #[serde(default)]
    pub domain_tag: String,
}

impl BenchTask {
    pub fn prompt(&self, variant: PromptVariant) -> &str {
        match variant {
            PromptVariant::Detailed => &self.detailed_prompt,
            PromptVariant::Simple => &self.simple_prompt,
        }
    }
}

#[derive(Debug, Deserialize)]
struct SuiteDoc {
    tasks: Vec<BenchTask>,
}

/// Parses a suite manifest. Tasks come back sorted by id.
pub fn parse_suite(doc: &str, base_dir: &Path) -> Result<Vec<BenchTask>, BenchError> {
    let suite: SuiteDoc = serde_json::from_str(doc).map_err(|e| BenchError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = BTreeSet::new();
    let mut tasks = suite.tasks;
    for t in &mut tasks {
        let invalid = |reason: &str| BenchError::InvalidTask { id: t.id.clone(), reason: reason.to_string() };
        if t.id.trim().is_empty() {
            return Err(invalid("empty id"));
        }
        if !seen.insert(t.id.clone()) {
            return Err(invalid("duplicate id"));
        }
        if t.detailed_prompt.trim().is_empty() || t.simple_prompt.trim().is_empty() {
            return Err(invalid("both prompts must be nonempty"));
        }
        if let Err(reason) = t.checker.validate() {
            return Err(invalid(&reason));
        }
        if t.data_file.is_relative() {
            t.data_file = base_dir.join(&t.data_file);
        }
        if !t.data_file.is_file() {
            return Err(BenchError::MissingDataFile(t.id.clone()));
        }
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(tasks)
}

pub fn load_suite(path: &Path) -> Result<Vec<BenchTask>, BenchError> {
    let doc = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    parse_suite(&doc, path.parent().unwrap_or(Path::new(".")))
}
