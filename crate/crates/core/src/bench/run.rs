use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::report::{aggregate, Aggregation, BenchReport, TraceRecord};
use super::suite::BenchTask;
use super::BenchError;
use crate::pipeline::{run_pipeline, PipelineConfig, Services};
use crate::retrieval::KnowledgeIndexes;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Completed traces are appended here and skipped on the next run.
    pub journal: Option<PathBuf>,
    pub aggregation: Aggregation,
}

/// Reads completed traces from a journal. A torn final line, as left by a
/// crash mid-write, is ignored.
pub fn read_journal(path: &Path) -> Result<Vec<TraceRecord>, BenchError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(BenchError::Io(format!("{}: {e}", path.display()))),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => {
                tracing::warn!(line = i + 1, "ignoring incomplete last journal line");
            }
            Err(e) => return Err(BenchError::Journal { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn check_configs(configs: &[PipelineConfig], services: &Services<'_>) -> Result<(), BenchError> {
    if configs.is_empty() {
        return Err(BenchError::InvalidConfig("no pipeline configurations".into()));
    }
    let mut labels = BTreeSet::new();
    for c in configs {
        c.validate().map_err(BenchError::InvalidConfig)?;
        if !labels.insert(c.label.as_str()) {
            return Err(BenchError::InvalidConfig(format!("duplicate label {}", c.label)));
        }
        if c.retrieval && services.embedder.is_none() {
            return Err(BenchError::InvalidConfig(format!("{}: retrieval needs an embedder", c.label)));
        }
    }
    Ok(())
}

fn load_indexes(
    configs: &[PipelineConfig],
    services: &Services<'_>,
) -> Result<HashMap<PathBuf, KnowledgeIndexes>, BenchError> {
    let mut loaded = HashMap::new();
    for path in configs.iter().filter(|c| c.retrieval).filter_map(|c| c.kb_index.as_ref()) {
        if loaded.contains_key(path) {
            continue;
        }
        let idx = KnowledgeIndexes::load(path)?;
        if let Some(emb) = services.embedder {
            if emb.descriptor() != idx.embedder() {
                return Err(BenchError::InvalidConfig(format!(
                    "{} was built with {} but the query embedder is {}",
                    path.display(),
                    idx.embedder(),
                    emb.descriptor()
                )));
            }
        }
        loaded.insert(path.clone(), idx);
    }
    Ok(loaded)
}

/// Runs every task under every config and aggregates the outcomes.
///
/// Tasks of one config run in parallel on `config.workers` threads. Pipeline
/// errors become `Failed` records. With a journal, pairs already recorded
/// there are not rerun.
pub fn run_suite(
    tasks: &[BenchTask],
    configs: &[PipelineConfig],
    services: &Services<'_>,
    opts: &RunOptions,
) -> Result<BenchReport, BenchError> {
    check_configs(configs, services)?;
    let indexes = load_indexes(configs, services)?;

    let mut done: BTreeMap<(String, String), TraceRecord> = BTreeMap::new();
    let journal = match &opts.journal {
        Some(path) => {
            for r in read_journal(path)? {
                done.insert((r.config.clone(), r.task_id.clone()), r);
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
            Some(Mutex::new(file))
        }
        None => None,
    };
    if !done.is_empty() {
        tracing::info!(resumed = done.len(), "resuming from journal");
    }

    let mut per_task = Vec::with_capacity(tasks.len() * configs.len());
    for config in configs {
        let idx = config.kb_index.as_ref().and_then(|p| indexes.get(p));
        let pending: Vec<&BenchTask> = tasks
            .iter()
            .filter(|t| !done.contains_key(&(config.label.clone(), t.id.clone())))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| BenchError::Io(e.to_string()))?;
        let fresh: Vec<Result<TraceRecord, BenchError>> = pool.install(|| {
            pending
                .par_iter()
                .map(|task| {
                    let record = run_task(task, config, services, idx);
                    if let Some(j) = &journal {
                        append(j, &record)?;
                    }
                    Ok(record)
                })
                .collect()
        });
        for r in fresh {
            let r = r?;
            done.insert((r.config.clone(), r.task_id.clone()), r);
        }
        for t in tasks {
            if let Some(r) = done.get(&(config.label.clone(), t.id.clone())) {
                per_task.push(r.clone());
            }
        }
    }

    Ok(BenchReport {
        aggregation: opts.aggregation,
        aggregate: aggregate(configs, &per_task, opts.aggregation),
        configs: configs.to_vec(),
        per_task,
    })
}

fn run_task(
    task: &BenchTask,
    config: &PipelineConfig,
    services: &Services<'_>,
    idx: Option<&KnowledgeIndexes>,
) -> TraceRecord {
    let prompt = task.prompt(config.prompt_variant);
    let span = tracing::info_span!("task", id = %task.id, config = %config.label);
    let _g = span.enter();
    match run_pipeline(prompt, &task.data_file, &task.checker, config, services, idx) {
        Ok(trace) => {
            tracing::info!(outcome = %trace.terminal_outcome, iterations = trace.iterations_used, "done");
            TraceRecord::from_trace(&task.id, &config.label, &trace)
        }
        Err(e) => {
            tracing::warn!(error = %e, "task failed before the repair loop");
            TraceRecord::failed(&task.id, &config.label, e.to_string())
        }
    }
}

fn append(journal: &Mutex<File>, record: &TraceRecord) -> Result<(), BenchError> {
    let mut line = serde_json::to_string(record).expect("trace serializes");
    line.push('\n');
    let mut f = journal.lock().unwrap_or_else(|e| e.into_inner());
    f.write_all(line.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| BenchError::Io(format!("journal: {e}")))
}
