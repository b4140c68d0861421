use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::report::Aggregation;
use super::BenchError;
use crate::pipeline::PipelineConfig;

/// How scripts are executed.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum RunnerSpec {
    /// `"stub"` for the in-process stub, otherwise a runner program.
    Name(String),
    /// Runner program plus leading arguments.
    Command(Vec<String>),
}

impl Default for RunnerSpec {
    fn default() -> Self {
        RunnerSpec::Name("stub".into())
    }
}

impl RunnerSpec {
    /// `None` means the stub.
    pub fn command(&self) -> Option<Vec<String>> {
        match self {
            RunnerSpec::Name(n) if n == "stub" => None,
            RunnerSpec::Name(n) => Some(vec![n.clone()]),
            RunnerSpec::Command(c) => Some(c.clone()),
        }
    }
}

/// Bench run configuration, TOML or JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfigFile {
    pub server_url: Option<String>,
    pub embedding_model: Option<String>,
    /// Scripted mock replies; when set, no model server is contacted.
    pub mock_script: Option<PathBuf>,
    #[serde(default)]
    pub runner: RunnerSpec,
    pub system_prompt: Option<String>,
    pub intent_template: Option<PathBuf>,
    pub work_root: Option<PathBuf>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(rename = "pipeline")]
    pub pipelines: Vec<PipelineConfig>,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

pub fn load_bench_config(path: &Path) -> Result<BenchConfigFile, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg: BenchConfigFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(&text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(&text, s.start))
                .unwrap_or((0, 0));
            BenchError::Parse { line, column, message: e.message().to_string() }
        })?
    };
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(base, &mut cfg.mock_script);
    resolve(base, &mut cfg.intent_template);
    resolve(base, &mut cfg.work_root);
    for p in &mut cfg.pipelines {
        resolve(base, &mut p.kb_index);
        p.validate().map_err(BenchError::InvalidConfig)?;
    }
    if cfg.pipelines.is_empty() {
        return Err(BenchError::InvalidConfig("no [[pipeline]] entries".into()));
    }
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
