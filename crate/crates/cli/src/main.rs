mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use settings::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "webpilot", version, about = "Drive a browser from a natural-language goal")]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, env = "WEBPILOT_CONFIG")]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Carry out one task.
    Run(RunArgs),
    /// Score recorded traces.
    Eval(EvalArgs),
    /// Print the indexed element list of an HTML file.
    Distill(DistillArgs),
    /// Inspect or empty an action cache file.
    Cache {
        #[command(subcommand)]
        action: CacheCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriverKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalKind {
    Lexical,
    Oracle,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Scripted responses (JSON).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Pricing table (TOML); the bundled one otherwise.
    #[arg(long)]
    pricing: Option<PathBuf>,
    /// `component=model` pairs, or one model for everything.
    #[arg(long, env = settings::MODELS_ENV)]
    models: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    goal: Option<String>,
    /// Start page; the graph's start node on replay.
    #[arg(long)]
    url: Option<String>,
    #[arg(long, value_enum)]
    driver: Option<DriverKind>,
    /// Snapshot graph directory for the replay driver.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    /// Action cache file; read before and written after the run.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, value_parser = ["lru", "lfu"])]
    policy: Option<String>,
    #[arg(long)]
    budget_steps: Option<usize>,
    /// Proposal rounds per step.
    #[arg(long)]
    retries: Option<usize>,
    /// USD.
    #[arg(long, env = settings::MAX_COST_ENV)]
    max_cost: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Show the browser window on live runs.
    #[arg(long)]
    headed: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trace file (JSON).
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Directory holding `<task id>/script.json` per task, for the scripted backend.
    #[arg(long)]
    scripts: Option<PathBuf>,
    /// Ranking used for recall figures.
    #[arg(long, value_enum, default_value = "lexical")]
    proposals: ProposalKind,
    /// Tasks evaluated in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Writes report.json here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    html: PathBuf,
    /// Keep only elements containing one of these strings.
    #[arg(long = "search")]
    search: Vec<String>,
    /// Print elements and counts as JSON instead.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum CacheCommand {
    List {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    Clear {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = settings::FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Run(args) => commands::run(args, &file),
        Command::Eval(args) => commands::eval(args, &file),
        Command::Distill(args) => commands::distill(args, &file),
        Command::Cache { action: CacheCommand::List { cache } } => commands::cache_list(cache, &file),
        Command::Cache { action: CacheCommand::Clear { cache } } => commands::cache_clear(cache, &file),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
    }
}
