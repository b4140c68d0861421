use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Index of the fenced block among all fences in the reply.
    FencedBlock(usize),
    WholeReply,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedScript {
    pub source: String,
    /// Info string of the fence; empty when the fence had none.
    pub language_tag: String,
    pub provenance: Provenance,
}

const FENCE: &str = "```";

fn fence_info(line: &str) -> Option<&str> {
    line.trim_start().strip_prefix(FENCE).map(str::trim)
}

/// Drops leading and trailing blank lines and trailing whitespace, keeping
/// the indentation of the first line.
fn tidy(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty());
    let end = lines.iter().rposition(|l| !l.trim().is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].join("\n").trim_end().to_string(),
        _ => String::new(),
    }
}

/// Pulls the script out of a model reply.
///
/// The first non-empty fenced block wins; an unterminated fence runs to the
/// end of the reply. A reply without fences is taken whole.
pub fn extract_code(reply: &str) -> Result<GeneratedScript, GatewayError> {
    if reply.trim().is_empty() {
        return Err(GatewayError::EmptyReply);
    }
    let lines: Vec<&str> = reply.lines().collect();
    let mut i = 0;
    let mut block = 0;
    let mut saw_fence = false;
    while i < lines.len() {
        let Some(info) = fence_info(lines[i]) else {
            i += 1;
            continue;
        };
        saw_fence = true;
        let tag = info.split_whitespace().next().unwrap_or_default().to_string();
        let body_start = i + 1;
        let mut j = body_start;
        while j < lines.len() && fence_info(lines[j]) != Some("") {
            j += 1;
        }
        let source = tidy(&lines[body_start..j]);
        if !source.is_empty() {
            return Ok(GeneratedScript {
                source,
                language_tag: tag,
                provenance: Provenance::FencedBlock(block),
            });
        }
        block += 1;
        i = j + 1;
    }
    if saw_fence {
        return Err(GatewayError::EmptyReply);
    }
    Ok(GeneratedScript {
        source: tidy(&lines),
        language_tag: String::new(),
        provenance: Provenance::WholeReply,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_block() {
        let s = extract_code("Here you go:\n```python\nprint(1)\n```\nDone.").unwrap();
        assert_eq!(s.source, "print(1)");
        assert_eq!(s.language_tag, "python");
        assert_eq!(s.provenance, Provenance::FencedBlock(0));
    }

    #[test]
    fn untagged_block() {
        let s = extract_code("```\nx = 1\n```").unwrap();
        assert_eq!(s.source, "x = 1");
        assert_eq!(s.language_tag, "");
    }

    #[test]
    fn prose_only() {
        let s = extract_code("import h5py\nprint('hi')\n").unwrap();
        assert_eq!(s.provenance, Provenance::WholeReply);
        assert_eq!(s.source, "import h5py\nprint('hi')");
    }

    #[test]
    fn first_of_two_blocks() {
        let reply = "```python\nfirst()\n```\ntext\n```python\nsecond()\n```";
        let s = extract_code(reply).unwrap();
        assert_eq!(s.source, "first()");
        assert!(!s.source.contains("second"));
    }

    #[test]
    fn empty_block_is_skipped() {
        let s = extract_code("```\n\n```\n```py\nok()\n```").unwrap();
        assert_eq!(s.source, "ok()");
        assert_eq!(s.provenance, Provenance::FencedBlock(1));
    }

    #[test]
    fn unterminated_fence_runs_to_end() {
        let s = extract_code("```python\nimport numpy as np\n    x = 1\n").unwrap();
        assert_eq!(s.source, "import numpy as np\n    x = 1");
    }

    #[test]
    fn indentation_preserved() {
        let s = extract_code("```python\n\n    indented()\n```").unwrap();
        assert_eq!(s.source, "    indented()");
    }

    #[test]
    fn empty_reply() {
        assert_eq!(extract_code(" \n"), Err(GatewayError::EmptyReply));
        assert_eq!(extract_code("```\n```"), Err(GatewayError::EmptyReply));
    }

    proptest! {
        #[test]
        fn idempotent(body in "[a-z =()\n]{1,60}", prose in "[A-Za-z .]{0,30}", fenced in any::<bool>()) {
            let reply = if fenced { format!("{prose}\n```python\n{body}\n```\n") } else { format!("{prose}\n{body}") };
            if let Ok(first) = extract_code(&reply) {
                let again = extract_code(&first.source).unwrap();
                prop_assert_eq!(&again.source, &first.source);
                prop_assert!(!again.source.contains(FENCE));
            }
        }
    }
}
