//! Sandboxed execution, outcome classification, and the iterative
//! error-repair loop.

mod driver;
mod outcome;
mod prompt;
mod sandbox;

pub use driver::{
    repair_loop, Attempt, RepairOptions, RepairTask, RepairTrace, DEFAULT_MAX_ITERATIONS, SCRIPT_FILE,
};
pub use outcome::{assess, classify, Assessment, CheckerSpec, Outcome};
pub use prompt::{
    build_repair_prompt, error_excerpt, tail_chars, Feedback, DEFAULT_TAIL_CHARS, FAILURE_LEAD, INCORRECT_LEAD,
};
pub use sandbox::{
    list_files, ExecutionRecord, RunRequest, Sandbox, SandboxError, StubSandbox, SubprocessRunner, MAX_TIMEOUT_S,
};
