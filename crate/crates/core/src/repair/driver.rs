use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::outcome::{assess, CheckerSpec, Outcome};
use super::prompt::{build_repair_prompt, error_excerpt, Feedback, DEFAULT_TAIL_CHARS};
use super::sandbox::{ExecutionRecord, RunRequest, Sandbox};
use crate::gateway::{extract_code, ChatRequest, GatewayError, GeneratedScript, ModelGateway, Provenance};

pub const DEFAULT_MAX_ITERATIONS: u32 = 6;
pub const SCRIPT_FILE: &str = "script.py";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOptions {
    /// Total generation attempts, the first one included.
    pub max_iterations: u32,
    /// Feed every earlier error back instead of only the latest.
    pub error_history: bool,
    /// Also retry scripts that ran but failed the checker.
    pub repair_incorrect: bool,
    pub tail_chars: usize,
    pub model: String,
    pub system_prompt: Option<String>,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// Parent directory for per-attempt working directories.
    pub work_root: Option<PathBuf>,
    pub env_overrides: BTreeMap<String, String>,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            error_history: false,
            repair_incorrect: false,
            tail_chars: DEFAULT_TAIL_CHARS,
            model: String::new(),
            system_prompt: None,
            temperature: 0.0,
            seed: Some(0),
            work_root: None,
            env_overrides: BTreeMap::from([("MPLBACKEND".to_string(), "Agg".to_string())]),
        }
    }
}

/// Inputs of one repair loop.
#[derive(Debug, Clone, Copy)]
pub struct RepairTask<'a> {
    /// Prompt of the first attempt, already disambiguated or enhanced.
    pub prompt: &'a str,
    /// Copied into every attempt's working directory.
    pub data_file: Option<&'a Path>,
    pub checker: &'a CheckerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// 1-based.
    pub iteration: u32,
    pub prompt: String,
    pub script: GeneratedScript,
    pub record: ExecutionRecord,
    pub outcome: Outcome,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub attempts: Vec<Attempt>,
    pub terminal_outcome: Outcome,
    pub iterations_used: u32,
    /// Set when the loop stopped on an infrastructure error.
    pub aborted: Option<String>,
}

impl RepairTrace {
    /// Outcome as of iteration `i` (1-based): the attempt's outcome while the
    /// loop was running, the terminal outcome afterwards.
    pub fn outcome_at(&self, i: u32) -> Outcome {
        if i >= self.iterations_used {
            return self.terminal_outcome;
        }
        self.attempts
            .get(i.saturating_sub(1) as usize)
            .map_or(Outcome::Failed, |a| a.outcome)
    }
}

fn abort_marker(prefix: &str, err: impl std::fmt::Display) -> String {
    format!("{prefix}: {err}")
}

fn no_script_record(err: &GatewayError) -> ExecutionRecord {
    ExecutionRecord {
        exit_code: -1,
        timed_out: false,
        stdout: String::new(),
        stderr: format!("No script could be extracted from the model reply ({err})."),
        duration_ms: 0,
        artifacts: Vec::new(),
        error: Some("not executed".into()),
    }
}

/// Generates, runs, and classifies scripts until one does not fail or the
/// iteration budget is spent.
///
/// Every repair prompt is the first prompt plus error feedback, so the first
/// prompt is a byte prefix of all attempt prompts. Gateway and sandbox errors
/// end the loop with a `Failed` outcome and an `aborted` marker.
pub fn repair_loop(
    task: RepairTask<'_>,
    opts: &RepairOptions,
    gateway: &dyn ModelGateway,
    sandbox: &dyn Sandbox,
) -> RepairTrace {
    let max = opts.max_iterations.max(1);
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut feedback: Vec<Feedback> = Vec::new();
    let mut aborted = None;

    for iteration in 1..=max {
        let prompt = if feedback.is_empty() {
            task.prompt.to_string()
        } else if opts.error_history {
            build_repair_prompt(task.prompt, &feedback)
        } else {
            build_repair_prompt(task.prompt, &feedback[feedback.len() - 1..])
        };
        let mut req = ChatRequest::single_turn(&opts.model, opts.system_prompt.as_deref(), &prompt);
        req.temperature = opts.temperature;
        req.seed = opts.seed;
        let reply = match gateway.chat(&req) {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(abort_marker("gateway error", e));
                break;
            }
        };
        let (script, record, workdir) = match extract_code(&reply) {
            Ok(script) => match execute(&script, task, opts, sandbox) {
                Ok((record, dir)) => (script, record, Some(dir)),
                Err(e) => {
                    aborted = Some(abort_marker("sandbox error", e));
                    break;
                }
            },
            Err(e) => {
                let empty = GeneratedScript {
                    source: String::new(),
                    language_tag: String::new(),
                    provenance: Provenance::WholeReply,
                };
                (empty, no_script_record(&e), None)
            }
        };
        let assessment = match &workdir {
            Some(dir) => assess(&record, task.checker, &dir.path().join("work")),
            None => assess(&record, task.checker, Path::new("/nonexistent")),
        };
        drop(workdir);

        let next = match assessment.outcome {
            Outcome::Failed => Some(Feedback::Failure(error_excerpt(&record, opts.tail_chars))),
            Outcome::Runnable if opts.repair_incorrect => Some(Feedback::Incorrect(
                assessment.diagnostic.clone().unwrap_or_else(|| "output rejected".into()),
            )),
            _ => None,
        };
        attempts.push(Attempt {
            iteration,
            prompt,
            script,
            record,
            outcome: assessment.outcome,
            diagnostic: assessment.diagnostic,
        });
        match next {
            Some(f) => feedback.push(f),
            None => break,
        }
    }

    let terminal_outcome = if aborted.is_some() {
        Outcome::Failed
    } else {
        attempts.last().map_or(Outcome::Failed, |a| a.outcome)
    };
    RepairTrace {
        iterations_used: attempts.len() as u32,
        attempts,
        terminal_outcome,
        aborted,
    }
}

/// Runs one script in a fresh directory holding `script.py` and a `work/`
/// subdirectory seeded with the data file.
fn execute(
    script: &GeneratedScript,
    task: RepairTask<'_>,
    opts: &RepairOptions,
    sandbox: &dyn Sandbox,
) -> Result<(ExecutionRecord, tempfile::TempDir), Box<dyn std::error::Error + Send + Sync>> {
    let dir = match &opts.work_root {
        Some(root) => {
            std::fs::create_dir_all(root)?;
            tempfile::Builder::new().prefix("attempt-").tempdir_in(root)?
        }
        None => tempfile::Builder::new().prefix("attempt-").tempdir()?,
    };
    let script_path = dir.path().join(SCRIPT_FILE);
    std::fs::write(&script_path, &script.source)?;
    let workdir = dir.path().join("work");
    std::fs::create_dir(&workdir)?;
    if let Some(data) = task.data_file {
        let name = data.file_name().ok_or("data file has no file name")?;
        std::fs::copy(data, workdir.join(name))?;
    }
    let req = RunRequest {
        script_path,
        workdir,
        timeout_s: task.checker.timeout_s,
        env_overrides: opts.env_overrides.clone(),
    };
    let record = sandbox.run(&req)?;
    Ok((record, dir))
}
