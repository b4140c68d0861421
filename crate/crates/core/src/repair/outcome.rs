use std::fmt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::sandbox::ExecutionRecord;

/// Script run outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Ran and passed the checker.
    Correct,
    /// Ran, but the checker rejected its output.
    Runnable,
    /// Nonzero exit or timeout.
    Failed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Correct => "correct",
            Outcome::Runnable => "runnable",
            Outcome::Failed => "failed",
        })
    }
}

fn default_timeout() -> u64 {
    120
}

/// Mechanical correctness check for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckerSpec {
    #[serde(default)]
    pub expected_artifacts: Vec<String>,
    /// Shell command run in the workdir after a successful script run; exit
    /// status 0 means the output is acceptable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker_command: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

impl CheckerSpec {
    pub fn artifacts(names: &[&str]) -> Self {
        Self {
            expected_artifacts: names.iter().map(|s| s.to_string()).collect(),
            checker_command: None,
            timeout_s: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.expected_artifacts.is_empty() && self.checker_command.is_none() {
            return Err("checker needs expected artifacts or a checker command".into());
        }
        if self.timeout_s == 0 {
            return Err("checker timeout must be positive".into());
        }
        Ok(())
    }
}

/// An outcome plus a short explanation when it is not `Correct`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assessment {
    pub outcome: Outcome,
    pub diagnostic: Option<String>,
}

/// Classifies a finished run: `Failed` on nonzero exit or timeout, otherwise
/// `Correct` when every expected artifact exists in `workdir` and the checker
/// command (if any) exits 0, otherwise `Runnable`.
pub fn classify(record: &ExecutionRecord, checker: &CheckerSpec, workdir: &Path) -> Outcome {
    assess(record, checker, workdir).outcome
}

pub fn assess(record: &ExecutionRecord, checker: &CheckerSpec, workdir: &Path) -> Assessment {
    if record.timed_out || record.exit_code != 0 {
        return Assessment { outcome: Outcome::Failed, diagnostic: None };
    }
    let missing: Vec<&str> = checker
        .expected_artifacts
        .iter()
        .filter(|a| !workdir.join(a).exists())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Assessment {
            outcome: Outcome::Runnable,
            diagnostic: Some(format!("expected output files were not produced: {}", missing.join(", "))),
        };
    }
    let Some(cmd) = &checker.checker_command else {
        return Assessment { outcome: Outcome::Correct, diagnostic: None };
    };
    match run_checker(cmd, workdir, Duration::from_secs(checker.timeout_s.max(1))) {
        Ok(CheckerRun { success: true, .. }) => Assessment { outcome: Outcome::Correct, diagnostic: None },
        Ok(CheckerRun { output, .. }) => Assessment {
            outcome: Outcome::Runnable,
            diagnostic: Some(format!("output check failed: {}", output.trim())),
        },
        Err(crash) => {
            tracing::warn!(command = %cmd, error = %crash, "checker crashed; counting run as runnable");
            Assessment {
                outcome: Outcome::Runnable,
                diagnostic: Some(format!("checker could not run: {crash}")),
            }
        }
    }
}

struct CheckerRun {
    success: bool,
    output: String,
}

fn run_checker(cmd: &str, workdir: &Path, limit: Duration) -> Result<CheckerRun, String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    match child.wait_timeout(limit).map_err(|e| e.to_string())? {
        Some(status) => {
            let out = child.wait_with_output().map_err(|e| e.to_string())?;
            // 126/127: the shell could not find or execute the command
            if matches!(status.code(), Some(126 | 127)) {
                return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
            }
            let mut output = String::from_utf8_lossy(&out.stderr).into_owned();
            output.push_str(&String::from_utf8_lossy(&out.stdout));
            Ok(CheckerRun { success: status.success(), output })
        }
        None => {
            let _ = child.kill();
            let _ = child.wait();
            Err(format!("checker exceeded {} s", limit.as_secs()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(exit_code: i32, timed_out: bool) -> ExecutionRecord {
        ExecutionRecord {
            exit_code,
            timed_out,
            stdout: String::new(),
            stderr: String::new(),
            duration_ms: 1,
            artifacts: vec![],
            error: None,
        }
    }

    #[test]
    fn nonzero_exit_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(classify(&record(1, false), &CheckerSpec::artifacts(&["plot.png"]), dir.path()), Outcome::Failed);
    }

    #[test]
    fn timeout_fails_even_with_zero_exit() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("plot.png"), b"x").unwrap();
        assert_eq!(classify(&record(0, true), &CheckerSpec::artifacts(&["plot.png"]), dir.path()), Outcome::Failed);
    }

    #[test]
    fn artifact_present_is_correct() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("plot.png"), b"x").unwrap();
        assert_eq!(classify(&record(0, false), &CheckerSpec::artifacts(&["plot.png"]), dir.path()), Outcome::Correct);
    }

    #[test]
    fn artifact_missing_is_runnable() {
        let dir = tempfile::tempdir().unwrap();
        let a = assess(&record(0, false), &CheckerSpec::artifacts(&["plot.png"]), dir.path());
        assert_eq!(a.outcome, Outcome::Runnable);
        assert!(a.diagnostic.unwrap().contains("plot.png"));
    }

    #[test]
    fn checker_command_decides() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = CheckerSpec { expected_artifacts: vec![], checker_command: Some("test -f ok.txt".into()), timeout_s: 5 };
        assert_eq!(classify(&record(0, false), &spec, dir.path()), Outcome::Runnable);
        std::fs::write(dir.path().join("ok.txt"), b"").unwrap();
        assert_eq!(classify(&record(0, false), &spec, dir.path()), Outcome::Correct);
        spec.checker_command = Some("echo wrong shape >&2; exit 2".into());
        let a = assess(&record(0, false), &spec, dir.path());
        assert_eq!(a.outcome, Outcome::Runnable);
        assert!(a.diagnostic.unwrap().contains("wrong shape"));
    }

    #[test]
    fn crashing_checker_is_runnable() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CheckerSpec {
            expected_artifacts: vec![],
            checker_command: Some("/definitely/not/a/checker".into()),
            timeout_s: 5,
        };
        let a = assess(&record(0, false), &spec, dir.path());
        assert_eq!(a.outcome, Outcome::Runnable);
        assert!(a.diagnostic.unwrap().starts_with("checker could not run"));
    }

    #[test]
    fn spec_validation() {
        let empty = CheckerSpec { expected_artifacts: vec![], checker_command: None, timeout_s: 5 };
        assert!(empty.validate().is_err());
        assert!(CheckerSpec::artifacts(&["a.png"]).validate().is_ok());
    }
}
