//! `atoll` — a desk-scale polystore. Three embedded engines with
//! different data models behind island scopes, a middleware that learns
//! plan performance in a training phase and reuses it in production,
//! and benchmark suites over the whole stack.

mod bench;
mod output;
mod session;
mod shell;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use atoll_middleware::{OnMissPolicy, PolystoreConfig};

use output::Format;
use session::Session;

#[derive(Parser)]
#[command(name = "atoll", version, about = "desk-scale polystore over three embedded engines")]
struct Cli {
    /// Path of the append-only monitor store (JSON lines). In-memory
    /// when omitted.
    #[arg(long, global = true)]
    monitor_store: Option<PathBuf>,

    /// Seed for every randomized behavior (production plan fallback,
    /// cohort generation).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// What production does on a signature miss.
    #[arg(long, global = true, value_enum, default_value_t = OnMiss::Random)]
    on_miss: OnMiss,

    /// Usage divergence beyond which a monitor hit is flagged stale.
    #[arg(long, global = true, default_value_t = 0.5)]
    stale_threshold: f64,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnMiss {
    Random,
    Train,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Load a data file into an engine.
    Load {
        /// rel-csv | array | kv-jsonl
        kind: String,
        path: PathBuf,
        /// Object name; array files name themselves in the header.
        name: Option<String>,
    },
    /// Run one polystore query.
    Query {
        /// Treat the query as training (equivalent to a TRAINING: prefix).
        #[arg(long)]
        training: bool,
        /// Preload data first: kind:path:name (repeatable).
        #[arg(long = "load", value_name = "KIND:PATH:NAME")]
        loads: Vec<String>,
        text: String,
    },
    /// Drain queued background plans.
    Idle {
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Summarize the monitor store grouped by query signature.
    MonitorDump,
    /// Benchmark suites: micro, matmul, overhead, medical.
    Bench {
        /// micro | matmul | overhead | medical
        suite: String,
        /// Comma-separated element counts (micro) or matrix sizes (matmul).
        #[arg(long)]
        sizes: Option<String>,
        /// Training patients for the medical suite.
        #[arg(long, default_value_t = 64)]
        patients: usize,
        /// Samples per patient for the medical suite (power of two).
        #[arg(long, default_value_t = 1024)]
        length: usize,
        /// Raise the medical suite to the reference experiment's scale
        /// (600 patients, 16384 samples).
        #[arg(long)]
        paper_scale: bool,
    },
    /// Interactive line-oriented shell.
    Shell,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = PolystoreConfig {
        monitor_path: cli.monitor_store.clone(),
        seed: cli.seed,
        stale_threshold: cli.stale_threshold,
        on_miss: match cli.on_miss {
            OnMiss::Random => OnMissPolicy::Random,
            OnMiss::Train => OnMissPolicy::Train,
        },
    };
    let format = match cli.format {
        FormatArg::Table => Format::Table,
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };

    let mut session = match Session::new(config, format) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    let outcome = match cli.command {
        Command::Load { kind, path, name } => session.load_file(&kind, &path, name.as_deref()),
        Command::Query { training, loads, text } => {
            let mut run = || {
                for spec in &loads {
                    let (kind, path, name) = parse_load_spec(spec)?;
                    let summary = session.load_file(&kind, &path, name.as_deref())?;
                    eprintln!("{summary}");
                }
                session.query(&text, training)
            };
            run()
        }
        Command::Idle { budget } => Ok(session.idle(budget)),
        Command::MonitorDump => Ok(session.monitor_dump()),
        Command::Bench {
            suite,
            sizes,
            patients,
            length,
            paper_scale,
        } => session.bench(&suite, sizes.as_deref(), patients, length, paper_scale),
        Command::Shell => {
            shell::run(&mut session);
            Ok(String::new())
        }
    };

    match outcome {
        Ok(text) => {
            if !text.is_empty() {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_load_spec(spec: &str) -> Result<(String, PathBuf, Option<String>), String> {
    let parts: Vec<&str> = spec.splitn(3, ':').collect();
    match parts.as_slice() {
        [kind, path, name] => Ok((kind.to_string(), PathBuf::from(path), Some(name.to_string()))),
        [kind, path] => Ok((kind.to_string(), PathBuf::from(path), None)),
        _ => Err(format!("bad --load spec `{spec}`; expected KIND:PATH:NAME")),
    }
}
