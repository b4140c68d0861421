//! Script execution backends.
//!
//! Production runs go through an external runner process that prints one JSON
//! result object on stdout. [`StubSandbox`] runs nothing: it interprets
//! `#!stub` directives in the script so that tests and mock benchmarks need no
//! Python installation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

/// Longest timeout a runner accepts.
pub const MAX_TIMEOUT_S: u64 = 600;
/// Extra time given to the runner process beyond the script timeout.
const RUNNER_GRACE: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub script_path: PathBuf,
    pub workdir: PathBuf,
    pub timeout_s: u64,
    pub env_overrides: BTreeMap<String, String>,
}

/// Outcome of one script run, in the runner's wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub exit_code: i32,
    pub timed_out: bool,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub duration_ms: u64,
    /// Files created in the workdir during the run, relative to it.
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Runner-side failure such as a missing script.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExecutionRecord {
    pub fn succeeded(&self) -> bool {
        self.exit_code == 0 && !self.timed_out
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid run request: {0}")]
    InvalidRequest(String),
    #[error("cannot start runner {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("runner did not finish within {0:?}")]
    RunnerHung(Duration),
    #[error("runner produced invalid output ({reason}): {output}")]
    BadOutput { reason: String, output: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Sandbox: Send + Sync {
    fn run(&self, req: &RunRequest) -> Result<ExecutionRecord, SandboxError>;
}

fn check_request(req: &RunRequest) -> Result<(), SandboxError> {
    if req.timeout_s == 0 || req.timeout_s > MAX_TIMEOUT_S {
        return Err(SandboxError::InvalidRequest(format!(
            "timeout {} s outside 1..={MAX_TIMEOUT_S}",
            req.timeout_s
        )));
    }
    if !req.workdir.is_dir() {
        return Err(SandboxError::InvalidRequest(format!(
            "workdir {} does not exist",
            req.workdir.display()
        )));
    }
    Ok(())
}

/// Invokes an external runner as
/// `<command...> --script <path> --workdir <path> --timeout <s>`.
#[derive(Debug, Clone)]
pub struct SubprocessRunner {
    command: Vec<String>,
}

impl SubprocessRunner {
    pub fn new(command: Vec<String>) -> Self {
        assert!(!command.is_empty(), "runner command must not be empty");
        Self { command }
    }
}

impl Sandbox for SubprocessRunner {
    fn run(&self, req: &RunRequest) -> Result<ExecutionRecord, SandboxError> {
        check_request(req)?;
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .arg("--script")
            .arg(&req.script_path)
            .arg("--workdir")
            .arg(&req.workdir)
            .arg("--timeout")
            .arg(req.timeout_s.to_string())
            .envs(&req.env_overrides)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let mut child = cmd.spawn().map_err(|source| SandboxError::Spawn {
            command: self.command.join(" "),
            source,
        })?;

        // drain both pipes so a chatty runner cannot block on a full pipe
        let mut out = child.stdout.take().expect("piped stdout");
        let mut err = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = out.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = err.read_to_end(&mut buf);
            buf
        });

        let limit = Duration::from_secs(req.timeout_s) + RUNNER_GRACE;
        let status = match child.wait_timeout(limit)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SandboxError::RunnerHung(limit));
            }
        };
        let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
        match serde_json::from_str::<ExecutionRecord>(stdout.trim()) {
            Ok(record) => Ok(record),
            Err(e) => Err(SandboxError::BadOutput {
                reason: format!("{e}; runner status {status}; runner stderr: {}", stderr.trim()),
                output: stdout.chars().take(2000).collect(),
            }),
        }
    }
}

/// Lists regular files under `dir`, relative to it.
pub fn list_files(dir: &Path) -> std::io::Result<BTreeSet<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            let ft = entry.file_type()?;
            if ft.is_dir() {
                walk(root, &path, out)?;
            } else if ft.is_file() {
                if let Ok(rel) = path.strip_prefix(root) {
                    out.insert(rel.to_string_lossy().replace('\\', "/"));
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeSet::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

/// In-process stand-in for the runner.
///
/// Recognized directives, one per line:
///
/// ```text
/// #!stub exit <code>
/// #!stub stdout <text>
/// #!stub stderr <text>
/// #!stub write <relative file>
/// #!stub timeout
/// ```
///
/// Scripts without directives succeed with empty output.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubSandbox;

impl Sandbox for StubSandbox {
    fn run(&self, req: &RunRequest) -> Result<ExecutionRecord, SandboxError> {
        check_request(req)?;
        let started = Instant::now();
        let script = match std::fs::read_to_string(&req.script_path) {
            Ok(s) => s,
            Err(e) => {
                return Ok(ExecutionRecord {
                    exit_code: -1,
                    timed_out: false,
                    stdout: String::new(),
                    stderr: String::new(),
                    duration_ms: 0,
                    artifacts: Vec::new(),
                    error: Some(format!("ScriptMissing: {}: {e}", req.script_path.display())),
                })
            }
        };
        let before = list_files(&req.workdir)?;
        let mut exit_code = 0;
        let mut timed_out = false;
        let mut stdout = String::new();
        let mut stderr = String::new();
        for line in script.lines() {
            let Some(directive) = line.trim_start().strip_prefix("#!stub ") else {
                continue;
            };
            let (verb, arg) = directive.split_once(' ').unwrap_or((directive, ""));
            match verb {
                "exit" => exit_code = arg.trim().parse().unwrap_or(1),
                "stdout" => {
                    stdout.push_str(arg);
                    stdout.push('\n');
                }
                "stderr" => {
                    stderr.push_str(arg);
                    stderr.push('\n');
                }
                "write" => {
                    let target = req.workdir.join(arg.trim());
                    if target.starts_with(&req.workdir) {
                        if let Some(parent) = target.parent() {
                            std::fs::create_dir_all(parent)?;
                        }
                        std::fs::write(target, b"stub artifact")?;
                    }
                }
                "timeout" => timed_out = true,
                _ => {}
            }
        }
        if timed_out {
            exit_code = -9;
        }
        let after = list_files(&req.workdir)?;
        Ok(ExecutionRecord {
            exit_code,
            timed_out,
            stdout,
            stderr,
            duration_ms: started.elapsed().as_millis() as u64,
            artifacts: after.difference(&before).cloned().collect(),
            error: None,
        })
    }
}
