//! Reference implementations and scripted-model helpers shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use scigen_core::embedding::EmbeddingVector;
use scigen_core::gateway::{MockFallback, MockRule, MockScript};

/// Textbook Levenshtein: the full (m+1) x (n+1) table.
pub fn oracle_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + sub);
        }
    }
    d[a.len()][b.len()]
}

pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        return 100.0;
    }
    (1.0 - oracle_levenshtein(a, b) as f64 / n as f64) * 100.0
}

/// Score band of `a` against `b` by exact integer comparison:
/// 2 for [87, 100], 1 for [80, 87), 0 below 80.
pub fn oracle_band(a: &str, b: &str) -> u8 {
    let n = a.chars().count().max(b.chars().count());
    let kept = 100 * (n - oracle_levenshtein(a, b));
    if kept >= 87 * n {
        2
    } else if kept >= 80 * n {
        1
    } else {
        0
    }
}

/// Brute-force cosine argmax; ties go to the lowest index.
pub fn oracle_top1(vectors: &[Vec<f32>], query: &[f32]) -> (usize, f64) {
    let norm = |v: &[f32]| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let qn = norm(query);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in vectors.iter().enumerate() {
        let dot: f64 = v.iter().zip(query).map(|(&x, &y)| x as f64 * y as f64).sum();
        let c = dot / (norm(v) * qn);
        if c > best.1 {
            best = (i, c);
        }
    }
    best
}

pub fn vector(v: &[f32]) -> EmbeddingVector {
    EmbeddingVector::new(v.to_vec()).unwrap()
}

/// Error line the failing script of attempt `j` prints for task `tag`.
pub fn error_line(tag: &str, j: u32) -> String {
    format!("KeyError: '/missing/{tag}/{j}'")
}

pub fn failing_reply(tag: &str, j: u32) -> String {
    format!(
        "Here is the script:\n```python\nimport h5py\n#!stub stderr Traceback (most recent call last):\n#!stub stderr {}\n#!stub exit 1\n```\n",
        error_line(tag, j)
    )
}

pub fn correct_reply(tag: &str) -> String {
    format!("```python\nimport matplotlib\n#!stub stdout {tag} done\n#!stub write plot.png\n```")
}

/// Rules for a model that answers prompts mentioning `tag` with failing
/// scripts until the prompt carries the previous attempt's error, and fixes
/// the script at attempt `fix_at`. `None` never fixes it.
pub fn repair_rules(tag: &str, fix_at: Option<u32>) -> Vec<MockRule> {
    let mut rules = Vec::new();
    match fix_at {
        Some(k) => {
            for j in (2..=k).rev() {
                let reply = if j == k { correct_reply(tag) } else { failing_reply(tag, j) };
                rules.push(MockRule::Contains { contains: error_line(tag, j - 1), reply });
            }
            let first = if k == 1 { correct_reply(tag) } else { failing_reply(tag, 1) };
            rules.push(MockRule::Contains { contains: tag.to_string(), reply: first });
        }
        None => rules.push(MockRule::Contains { contains: tag.to_string(), reply: failing_reply(tag, 0) }),
    }
    rules
}

pub fn scripted(rules: Vec<MockRule>) -> MockScript {
    MockScript { rules, fallback: MockFallback::Error, ..MockScript::default() }
}

/// How the scripted model treats one prompt variant of a synthetic task.
#[derive(Debug, Clone, Copy)]
pub enum Behaviour {
    FixAt(u32),
    NeverFix,
    /// Runs but never writes the expected plot.
    NoPlot,
}

pub struct SyntheticTask {
    pub id: &'static str,
    pub detailed: Behaviour,
    pub simple: Behaviour,
}

/// Six tasks whose simple prompts are harder than their detailed ones.
pub const SIX_TASKS: [SyntheticTask; 6] = [
    SyntheticTask { id: "eos-01", detailed: Behaviour::FixAt(1), simple: Behaviour::FixAt(2) },
    SyntheticTask { id: "eos-02", detailed: Behaviour::FixAt(2), simple: Behaviour::FixAt(3) },
    SyntheticTask { id: "mri-01", detailed: Behaviour::FixAt(1), simple: Behaviour::FixAt(1) },
    SyntheticTask { id: "mri-02", detailed: Behaviour::FixAt(3), simple: Behaviour::FixAt(5) },
    SyntheticTask { id: "tab-01", detailed: Behaviour::FixAt(4), simple: Behaviour::NeverFix },
    SyntheticTask { id: "tab-02", detailed: Behaviour::NoPlot, simple: Behaviour::NeverFix },
];

pub fn variant_tag(id: &str, variant: &str) -> String {
    format!("[{id}/{variant}]")
}

fn behaviour_rules(tag: &str, b: Behaviour) -> Vec<MockRule> {
    match b {
        Behaviour::FixAt(k) => repair_rules(tag, Some(k)),
        Behaviour::NeverFix => repair_rules(tag, None),
        Behaviour::NoPlot => vec![MockRule::Contains {
            contains: tag.to_string(),
            reply: "```python\n#!stub stdout computed the mean but saved nothing\n```".into(),
        }],
    }
}

/// Writes a suite manifest plus one schema manifest per task into `dir` and
/// returns the suite path and the matching scripted model.
pub fn write_suite(dir: &std::path::Path, tasks: &[SyntheticTask]) -> (std::path::PathBuf, MockScript) {
    let mut entries = Vec::new();
    let mut rules = Vec::new();
    for t in tasks {
        let data = format!("{}.json", t.id);
        let schema = serde_json::json!({
            "source_id": t.id,
            "datasets": [
                {"path": "/measurements/temperature", "shape": [24, 90], "dtype": "float32",
                 "attributes": [{"name": "units", "preview": "K"}]},
                {"path": "/geolocation/latitude", "shape": [90], "dtype": "float64", "attributes": []}
            ]
        });
        std::fs::write(dir.join(&data), schema.to_string()).unwrap();
        let dtag = variant_tag(t.id, "detailed");
        let stag = variant_tag(t.id, "simple");
        entries.push(serde_json::json!({
            "id": t.id,
            "data_file": data,
            "detailed_prompt": format!("{dtag} Read /measurements/temperature with h5py, convert kelvin to celsius and save a line plot to plot.png."),
            "simple_prompt": format!("{stag} Plot the temperature."),
            "checker": {"expected_artifacts": ["plot.png"], "timeout_s": 30},
            "domain_tag": t.id.split('-').next().unwrap(),
        }));
        rules.extend(behaviour_rules(&dtag, t.detailed));
        rules.extend(behaviour_rules(&stag, t.simple));
    }
    let suite = dir.join("suite.json");
    std::fs::write(&suite, serde_json::json!({ "tasks": entries }).to_string()).unwrap();
    (suite, scripted(rules))
}
