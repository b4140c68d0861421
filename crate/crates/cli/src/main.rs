use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use scigen_core::bench::{self, BenchConfigFile, ReportFormat, RunOptions};
use scigen_core::disambiguate::{disambiguate, DisambiguateConfig};
use scigen_core::embedding::Embedder;
use scigen_core::gateway::{
    simplify_prompt, HttpGateway, HttpGatewayOptions, MockModel, MockScript, MockServer, ModelGateway,
    DEFAULT_SERVER_URL, DEFAULT_SIMPLIFY_TEMPLATE, SERVER_URL_ENV,
};
use scigen_core::pipeline::{embedder_for, Services};
use scigen_core::repair::{Sandbox, StubSandbox, SubprocessRunner};
use scigen_core::retrieval::{
    build_index, decompose_intent, enhance_prompt, load_kb, IntentTriple, KnowledgeIndexes, DEFAULT_INTENT_TEMPLATE,
};
use scigen_core::schema::{dump_manifest, load_schema};

#[derive(Parser, Debug)]
#[command(name = "scigen", version, about = "Data-grounded generation and repair of analysis scripts")]
struct Cli {
    /// Model server base URL.
    #[arg(long, global = true, env = SERVER_URL_ENV)]
    server_url: Option<String>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the dataset hierarchy of an HDF5 file as a schema manifest.
    Schema {
        file: PathBuf,
    },
    /// Append exact dataset paths from a data file to a prompt.
    Disambiguate(DisambiguateArgs),
    /// Knowledge base tools.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Append the closest reference examples to a prompt.
    Retrieve(RetrieveArgs),
    /// Ask the model for a short version of a detailed prompt.
    Simplify {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        model: String,
        /// Template file with a {prompt} placeholder.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Benchmark runs and reports.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Serve scripted replies over the model server protocol.
    MockServer {
        /// JSON mock script; without it every prompt is echoed back.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:11434")]
        addr: String,
    },
}

#[derive(Args, Debug)]
struct DisambiguateArgs {
    #[arg(long)]
    prompt: String,
    /// HDF5 file or schema manifest (.json).
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    strict: Option<f64>,
    #[arg(long)]
    relaxed: Option<f64>,
    #[arg(long)]
    max_context: Option<usize>,
    /// Print matches and the augmented prompt as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum KbCommand {
    /// Embed a JSONL knowledge base into an index file.
    Build {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `hash:<dim>` for offline hashing, or `server` for the model server.
        #[arg(long, default_value = "hash:384")]
        embedder: String,
        #[arg(long, default_value = "all-minilm")]
        embedding_model: String,
    },
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    prompt: String,
    /// Index file from `kb build`.
    #[arg(long)]
    kb: PathBuf,
    /// Model for intent decomposition; without it the whole prompt is the
    /// query for every index.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Run a task suite under the configured pipelines.
    Run {
        #[arg(long)]
        suite: PathBuf,
        /// TOML or JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Journal of finished tasks; existing entries are not rerun.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Render a saved report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn server_options(url: Option<&str>) -> HttpGatewayOptions {
    HttpGatewayOptions {
        base_url: url.unwrap_or(DEFAULT_SERVER_URL).to_string(),
        ..HttpGatewayOptions::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let server_url = cli.server_url.as_deref();
    match cli.command {
        Command::Schema { file } => {
            let index = load_schema(&file)?;
            print!("{}", dump_manifest(&index));
        }
        Command::Disambiguate(args) => run_disambiguate(args)?,
        Command::Kb { command: KbCommand::Build { kb, out, embedder, embedding_model } } => {
            let descriptor = if embedder == "server" { format!("server:{embedding_model}") } else { embedder };
            let embedder = embedder_for(&descriptor, &server_options(server_url)).map_err(anyhow::Error::msg)?;
            let entries = load_kb(&kb)?;
            let index = build_index(&entries, embedder.as_ref())?;
            index.save(&out)?;
            eprintln!(
                "indexed {} entries with {} into {}",
                index.total_entries(),
                index.embedder(),
                out.display()
            );
        }
        Command::Retrieve(args) => run_retrieve(args, server_url)?,
        Command::Simplify { prompt, model, template } => {
            let template = match template {
                Some(p) => read(&p)?,
                None => DEFAULT_SIMPLIFY_TEMPLATE.to_string(),
            };
            let gateway = HttpGateway::new(server_options(server_url))?;
            println!("{}", simplify_prompt(&gateway, &model, &template, &prompt)?.trim());
        }
        Command::Bench { command: BenchCommand::Run { suite, config, out, resume } } => {
            run_bench(&suite, &config, &out, resume, server_url)?
        }
        Command::Bench { command: BenchCommand::Report { input, format } } => {
            let format: ReportFormat = format.parse().map_err(anyhow::Error::msg)?;
            let report: bench::BenchReport =
                serde_json::from_str(&read(&input)?).with_context(|| format!("parsing {}", input.display()))?;
            print!("{}", bench::emit_report(&report, format));
        }
        Command::MockServer { script, addr } => {
            let script = match script {
                Some(p) => MockScript::from_file(&p).with_context(|| format!("reading {}", p.display()))?,
                None => MockScript::echo(),
            };
            let server = MockServer::start(MockModel::new(script), &addr)?;
            eprintln!("mock model server listening on {}", server.url());
            server.join();
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run_disambiguate(args: DisambiguateArgs) -> Result<()> {
    let mut cfg = DisambiguateConfig::default();
    if let Some(s) = args.strict {
        cfg.strict_threshold = s;
    }
    if let Some(r) = args.relaxed {
        cfg.relaxed_threshold = r;
    }
    if let Some(m) = args.max_context {
        cfg.max_context_entries = m;
    }
    if cfg.relaxed_threshold > cfg.strict_threshold {
        bail!("relaxed threshold must not exceed the strict threshold");
    }
    let schema = load_schema(&args.schema)?;
    let (augmented, matches) = disambiguate(&args.prompt, &schema, &cfg)?;
    if args.json {
        let doc = serde_json::json!({
            "prompt": augmented.render(),
            "context_block": augmented.context_block,
            "matches": matches,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{}", augmented.render());
    }
    Ok(())
}

fn run_retrieve(args: RetrieveArgs, server_url: Option<&str>) -> Result<()> {
    let indexes = KnowledgeIndexes::load(&args.kb)?;
    let opts = server_options(server_url);
    let embedder = embedder_for(indexes.embedder(), &opts).map_err(anyhow::Error::msg)?;
    let triple = match &args.model {
        Some(model) => {
            let gateway = HttpGateway::new(opts)?;
            decompose_intent(&args.prompt, &gateway, model, DEFAULT_INTENT_TEMPLATE)?
        }
        None => IntentTriple::fallback(&args.prompt),
    };
    let enhanced = enhance_prompt(&args.prompt, &triple, &indexes, embedder.as_ref(), args.min_score)?;
    if args.json {
        let doc = serde_json::json!({
            "intent": triple,
            "retrieved": enhanced.retrieved,
            "prompt": enhanced.render(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{}", enhanced.render());
    }
    Ok(())
}

fn run_bench(suite: &Path, config: &Path, out: &Path, resume: Option<PathBuf>, server_url: Option<&str>) -> Result<()> {
    let cfg: BenchConfigFile = bench::load_bench_config(config)?;
    let tasks = bench::load_suite(suite)?;
    let url = server_url.or(cfg.server_url.as_deref());
    let mut opts = server_options(url);
    if let Some(m) = &cfg.embedding_model {
        opts.embedding_model = m.clone();
    }

    let gateway: Box<dyn ModelGateway> = match &cfg.mock_script {
        Some(p) => Box::new(MockModel::new(
            MockScript::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        )),
        None => Box::new(HttpGateway::new(opts.clone())?),
    };
    let sandbox: Box<dyn Sandbox> = match cfg.runner.command() {
        Some(cmd) => Box::new(SubprocessRunner::new(cmd)),
        None => Box::new(StubSandbox),
    };
    let embedder: Option<Box<dyn Embedder>> = match cfg.pipelines.iter().find(|p| p.retrieval) {
        Some(p) => {
            let path = p.kb_index.as_ref().expect("validated");
            let idx = KnowledgeIndexes::load(path)?;
            Some(embedder_for(idx.embedder(), &opts).map_err(anyhow::Error::msg)?)
        }
        None => None,
    };

    let mut services = Services::new(gateway.as_ref(), sandbox.as_ref());
    services.embedder = embedder.as_deref();
    services.system_prompt = cfg.system_prompt.clone().filter(|s| !s.trim().is_empty());
    services.work_root = cfg.work_root.clone();
    if let Some(p) = &cfg.intent_template {
        services.intent_template = read(p)?;
    }

    let run_opts = RunOptions {
        journal: resume,
        aggregation: cfg.aggregation,
    };
    let report = bench::run_suite(&tasks, &cfg.pipelines, &services, &run_opts)?;
    std::fs::write(out, bench::emit_report(&report, ReportFormat::Json))
        .with_context(|| format!("writing {}", out.display()))?;
    print!("{}", bench::emit_report(&report, ReportFormat::Markdown));
    Ok(())
}
