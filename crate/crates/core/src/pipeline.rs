//! One task through the whole pipeline: prompt variant, optional
//! disambiguation, optional retrieval, then the repair loop.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disambiguate::{disambiguate, DisambiguateConfig, DisambiguateError};
use crate::embedding::{Embedder, HashEmbedder};
use crate::gateway::{GatewayError, HttpGateway, HttpGatewayOptions, ModelGateway};
use crate::repair::{repair_loop, CheckerSpec, RepairOptions, RepairTask, RepairTrace, Sandbox};
use crate::retrieval::{decompose_intent, enhance_prompt, KnowledgeIndexes, RetrievalError, DEFAULT_INTENT_TEMPLATE};
use crate::schema::{load_schema, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    Detailed,
    Simple,
}

fn yes() -> bool {
    true
}

fn default_iterations() -> u32 {
    crate::repair::DEFAULT_MAX_ITERATIONS
}

fn one() -> usize {
    1
}

/// One strategy combination evaluated by the bench harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Names the configuration in reports; must be unique within a run.
    pub label: String,
    pub prompt_variant: PromptVariant,
    #[serde(default = "yes")]
    pub disambiguation: bool,
    #[serde(default)]
    pub retrieval: bool,
    #[serde(default = "default_iterations")]
    pub max_iterations: u32,
    pub model: String,
    #[serde(default = "one")]
    pub workers: usize,
    /// Knowledge index file, required with `retrieval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kb_index: Option<PathBuf>,
    #[serde(default)]
    pub repair_incorrect: bool,
    #[serde(default)]
    pub error_history: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_score: Option<f64>,
}

impl PipelineConfig {
    pub fn new(label: &str, variant: PromptVariant, model: &str) -> Self {
        Self {
            label: label.to_string(),
            prompt_variant: variant,
            disambiguation: true,
            retrieval: false,
            max_iterations: default_iterations(),
            model: model.to_string(),
            workers: 1,
            kb_index: None,
            repair_incorrect: false,
            error_history: false,
            min_score: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.label.trim().is_empty() {
            return Err("config label must not be empty".into());
        }
        let who = &self.label;
        if self.max_iterations == 0 {
            return Err(format!("{who}: max_iterations must be at least 1"));
        }
        if self.workers == 0 {
            return Err(format!("{who}: workers must be at least 1"));
        }
        if self.model.trim().is_empty() {
            return Err(format!("{who}: model must not be empty"));
        }
        if self.retrieval && self.kb_index.is_none() {
            return Err(format!("{who}: retrieval needs kb_index"));
        }
        if self.min_score.is_some_and(|s| !s.is_finite()) {
            return Err(format!("{who}: min_score must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("disambiguation: {0}")]
    Disambiguate(#[from] DisambiguateError),
    #[error("intent decomposition: {0}")]
    Gateway(#[from] GatewayError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("retrieval is enabled but no knowledge index or embedder was provided")]
    RetrievalUnavailable,
}

/// Shared services for pipeline runs.
pub struct Services<'a> {
    pub gateway: &'a dyn ModelGateway,
    pub sandbox: &'a dyn Sandbox,
    /// Query embedder for retrieval; must match the index's embedder.
    pub embedder: Option<&'a dyn Embedder>,
    pub intent_template: String,
    pub system_prompt: Option<String>,
    pub disambiguation: DisambiguateConfig,
    pub work_root: Option<PathBuf>,
}

impl<'a> Services<'a> {
    pub fn new(gateway: &'a dyn ModelGateway, sandbox: &'a dyn Sandbox) -> Self {
        Self {
            gateway,
            sandbox,
            embedder: None,
            intent_template: DEFAULT_INTENT_TEMPLATE.to_string(),
            system_prompt: None,
            disambiguation: DisambiguateConfig::default(),
            work_root: None,
        }
    }
}

/// Builds the first-attempt prompt. The user prompt stays a byte prefix.
pub fn prepare_prompt(
    user_prompt: &str,
    data_file: &Path,
    config: &PipelineConfig,
    services: &Services<'_>,
    indexes: Option<&KnowledgeIndexes>,
) -> Result<String, PipelineError> {
    let mut prompt = user_prompt.to_string();
    if config.disambiguation {
        let schema = load_schema(data_file)?;
        let (augmented, _) = disambiguate(user_prompt, &schema, &services.disambiguation)?;
        prompt = augmented.render();
    }
    if config.retrieval {
        let (Some(indexes), Some(embedder)) = (indexes, services.embedder) else {
            return Err(PipelineError::RetrievalUnavailable);
        };
        let triple = decompose_intent(user_prompt, services.gateway, &config.model, &services.intent_template)?;
        prompt = enhance_prompt(&prompt, &triple, indexes, embedder, config.min_score)?.render();
    }
    Ok(prompt)
}

pub fn repair_options(config: &PipelineConfig, services: &Services<'_>) -> RepairOptions {
    RepairOptions {
        max_iterations: config.max_iterations,
        error_history: config.error_history,
        repair_incorrect: config.repair_incorrect,
        model: config.model.clone(),
        system_prompt: services.system_prompt.clone(),
        work_root: services.work_root.clone(),
        ..RepairOptions::default()
    }
}

/// Prepares the prompt and runs the repair loop for one task.
pub fn run_pipeline(
    user_prompt: &str,
    data_file: &Path,
    checker: &CheckerSpec,
    config: &PipelineConfig,
    services: &Services<'_>,
    indexes: Option<&KnowledgeIndexes>,
) -> Result<RepairTrace, PipelineError> {
    let prompt = prepare_prompt(user_prompt, data_file, config, services, indexes)?;
    let task = RepairTask {
        prompt: &prompt,
        data_file: Some(data_file),
        checker,
    };
    Ok(repair_loop(task, &repair_options(config, services), services.gateway, services.sandbox))
}

/// Creates a query embedder for an index descriptor such as `hash:384` or
/// `server:all-minilm`.
pub fn embedder_for(descriptor: &str, server: &HttpGatewayOptions) -> Result<Box<dyn Embedder>, String> {
    if let Some(dim) = descriptor.strip_prefix("hash:") {
        let dim: usize = dim.parse().map_err(|_| format!("bad hash dimension in {descriptor:?}"))?;
        if dim == 0 {
            return Err("hash dimension must be positive".into());
        }
        return Ok(Box::new(HashEmbedder::new(dim)));
    }
    if let Some(model) = descriptor.strip_prefix("server:") {
        let opts = HttpGatewayOptions {
            embedding_model: model.to_string(),
            ..server.clone()
        };
        return HttpGateway::new(opts).map(|g| Box::new(g) as Box<dyn Embedder>).map_err(|e| e.to_string());
    }
    Err(format!("unknown embedder {descriptor:?}"))
}
