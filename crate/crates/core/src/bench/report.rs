use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gateway::prompt_sha256;
use crate::pipeline::PipelineConfig;
use crate::repair::{tail_chars, Outcome, RepairTrace, DEFAULT_TAIL_CHARS};

/// Reported form of one attempt. Carries no timings or paths so that reports
/// are reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub iteration: u32,
    pub prompt_sha256: String,
    pub script: String,
    pub exit_code: i32,
    pub timed_out: bool,
    pub stderr_tail: String,
    pub outcome: Outcome,
}

/// One (task, config) result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub task_id: String,
    pub config: String,
    pub attempts: Vec<AttemptRecord>,
    pub terminal_outcome: Outcome,
    pub iterations_used: u32,
    /// Why the task stopped early, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceRecord {
    pub fn from_trace(task_id: &str, config: &str, trace: &RepairTrace) -> Self {
        Self {
            task_id: task_id.to_string(),
            config: config.to_string(),
            attempts: trace
                .attempts
                .iter()
                .map(|a| AttemptRecord {
                    iteration: a.iteration,
                    prompt_sha256: prompt_sha256(&a.prompt),
                    script: a.script.source.clone(),
                    exit_code: a.record.exit_code,
                    timed_out: a.record.timed_out,
                    stderr_tail: tail_chars(&a.record.stderr, DEFAULT_TAIL_CHARS).to_string(),
                    outcome: a.outcome,
                })
                .collect(),
            terminal_outcome: trace.terminal_outcome,
            iterations_used: trace.iterations_used,
            error: trace.aborted.clone(),
        }
    }

    /// A task that never reached the repair loop.
    pub fn failed(task_id: &str, config: &str, error: String) -> Self {
        Self {
            task_id: task_id.to_string(),
            config: config.to_string(),
            attempts: Vec::new(),
            terminal_outcome: Outcome::Failed,
            iterations_used: 0,
            error: Some(error),
        }
    }

    /// Outcome as of iteration `i`, 1-based.
    pub fn outcome_at(&self, i: u32) -> Outcome {
        if i >= self.iterations_used {
            return self.terminal_outcome;
        }
        self.attempts.get(i as usize - 1).map_or(Outcome::Failed, |a| a.outcome)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Outcome of every task as of iteration i.
    #[default]
    Cumulative,
    /// Outcomes of the attempts made at iteration i only.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub config: String,
    pub iteration: u32,
    pub tasks: usize,
    pub correct_pct: f64,
    pub runnable_pct: f64,
    pub failed_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub aggregation: Aggregation,
    pub configs: Vec<PipelineConfig>,
    /// Ordered by config, then task id.
    pub per_task: Vec<TraceRecord>,
    pub aggregate: Vec<AggregateCell>,
}

/// Splits 100% over `counts` in hundredths. Correct and runnable are rounded
/// half up on their own, so a larger count never shows a smaller share; the
/// last nonzero class takes the residue and the parts add to exactly 100.00.
pub fn percentages(counts: [usize; 3]) -> [f64; 3] {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return [0.0; 3];
    }
    let round = |n: usize| (20_000 * n + total) / (2 * total);
    let mut units = [round(counts[0]), round(counts[1]), 0];
    if counts[2] > 0 {
        units[2] = 10_000 - units[0] - units[1];
    } else if counts[1] > 0 {
        units[1] = 10_000 - units[0];
    } else {
        units[0] = 10_000;
    }
    units.map(|u| u as f64 / 100.0)
}

fn cell(config: &str, iteration: u32, outcomes: impl Iterator<Item = Outcome>) -> AggregateCell {
    let mut counts = [0usize; 3];
    for o in outcomes {
        counts[match o {
            Outcome::Correct => 0,
            Outcome::Runnable => 1,
            Outcome::Failed => 2,
        }] += 1;
    }
    let [correct_pct, runnable_pct, failed_pct] = percentages(counts);
    AggregateCell {
        config: config.to_string(),
        iteration,
        tasks: counts.iter().sum(),
        correct_pct,
        runnable_pct,
        failed_pct,
    }
}

/// Per-config, per-iteration outcome distributions over `records`.
pub fn aggregate(configs: &[PipelineConfig], records: &[TraceRecord], mode: Aggregation) -> Vec<AggregateCell> {
    let mut cells = Vec::new();
    for c in configs {
        let mine: Vec<&TraceRecord> = records.iter().filter(|r| r.config == c.label).collect();
        if mine.is_empty() {
            continue;
        }
        for i in 1..=c.max_iterations {
            match mode {
                Aggregation::Cumulative => cells.push(cell(&c.label, i, mine.iter().map(|r| r.outcome_at(i)))),
                Aggregation::Marginal => {
                    let made: Vec<Outcome> = mine
                        .iter()
                        .filter_map(|r| r.attempts.get(i as usize - 1).map(|a| a.outcome))
                        .collect();
                    if !made.is_empty() {
                        cells.push(cell(&c.label, i, made.into_iter()));
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format {other:?} (json, csv, markdown)")),
        }
    }
}

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("config,iteration,correct_pct,runnable_pct,failed_pct\n");
            for c in &report.aggregate {
                let _ = writeln!(
                    s,
                    "{},{},{:.2},{:.2},{:.2}",
                    csv_field(&c.config),
                    c.iteration,
                    c.correct_pct,
                    c.runnable_pct,
                    c.failed_pct
                );
            }
            s
        }
        ReportFormat::Markdown => markdown(report),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn markdown(report: &BenchReport) -> String {
    let mut s = String::new();
    for c in &report.configs {
        let _ = writeln!(s, "## {}\n", c.label);
        let _ = writeln!(
            s,
            "prompt: {}, disambiguation: {}, retrieval: {}, max iterations: {}, model: {}\n",
            match c.prompt_variant {
                crate::pipeline::PromptVariant::Detailed => "detailed",
                crate::pipeline::PromptVariant::Simple => "simple",
            },
            on_off(c.disambiguation),
            on_off(c.retrieval),
            c.max_iterations,
            c.model
        );
        s.push_str("| iteration | correct % | runnable % | failed % |\n");
        s.push_str("|---:|---:|---:|---:|\n");
        for cell in report.aggregate.iter().filter(|a| a.config == c.label) {
            let _ = writeln!(
                s,
                "| {} | {:.2} | {:.2} | {:.2} |",
                cell.iteration, cell.correct_pct, cell.runnable_pct, cell.failed_pct
            );
        }
        s.push('\n');
    }
    s
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}
