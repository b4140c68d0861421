use super::sandbox::ExecutionRecord;

pub const DEFAULT_TAIL_CHARS: usize = 4000;
pub const FAILURE_LEAD: &str = "The previously generated script failed with this error:";
pub const INCORRECT_LEAD: &str = "The previously generated script ran, but its output was rejected:";
const SEPARATOR: &str = "\n\n---\n";
const INSTRUCTION: &str = "Return the corrected full script in a single Python code block.";

/// What went wrong in an attempt, as fed back to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feedback {
    /// The script failed to run; carries the error excerpt.
    Failure(String),
    /// The script ran but the checker rejected it; carries the diagnostic.
    Incorrect(String),
}

impl Feedback {
    pub fn text(&self) -> &str {
        match self {
            Feedback::Failure(t) | Feedback::Incorrect(t) => t,
        }
    }

    fn lead(&self) -> &'static str {
        match self {
            Feedback::Failure(_) => FAILURE_LEAD,
            Feedback::Incorrect(_) => INCORRECT_LEAD,
        }
    }
}

/// Last `n` characters of `s`.
pub fn tail_chars(s: &str, n: usize) -> &str {
    let count = s.chars().count();
    if count <= n {
        return s;
    }
    let (idx, _) = s.char_indices().nth(count - n).expect("index within bounds");
    &s[idx..]
}

/// Error text for a failed run: the stderr tail, or a notice when stderr is
/// empty. Timeouts are always called out.
pub fn error_excerpt(record: &ExecutionRecord, tail: usize) -> String {
    let stderr = record.stderr.trim_end();
    let stderr = if stderr.is_empty() { record.error.as_deref().unwrap_or("") } else { stderr };
    let stderr = tail_chars(stderr, tail);
    match (record.timed_out, stderr.is_empty()) {
        (true, true) => "The process exceeded the time limit and was stopped. No error output was captured.".into(),
        (true, false) => format!("The process exceeded the time limit and was stopped.\n{stderr}"),
        (false, true) => format!(
            "The process exited with code {} and wrote no error output.",
            record.exit_code
        ),
        (false, false) => stderr.to_string(),
    }
}

/// Appends error feedback to `base`, which stays a byte prefix of the result.
///
/// `feedback` is ordered oldest first; the last item is the latest attempt.
pub fn build_repair_prompt(base: &str, feedback: &[Feedback]) -> String {
    let mut out = String::with_capacity(base.len() + 256);
    out.push_str(base);
    out.push_str(SEPARATOR);
    if let Some((latest, earlier)) = feedback.split_last() {
        if !earlier.is_empty() {
            out.push_str("Earlier attempts also failed, oldest first:\n");
            for (i, f) in earlier.iter().enumerate() {
                out.push_str(&format!("Attempt {}:\n```\n{}\n```\n", i + 1, f.text()));
            }
            out.push('\n');
        }
        out.push_str(latest.lead());
        out.push_str("\n```\n");
        out.push_str(latest.text());
        out.push_str("\n```\n\n");
    }
    out.push_str(INSTRUCTION);
    out
}
