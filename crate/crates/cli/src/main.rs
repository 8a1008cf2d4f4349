//! `sentaug` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::BackendChoice;
use sentaug::augment::FailurePolicy;

/// LLM-based augmentation of sentiment corpora, training-set combinations,
/// seeded evaluation and latency benchmarks.
#[derive(Debug, Parser)]
#[command(name = "sentaug", version, propagate_version = true)]
pub struct Cli {
    /// TOML settings file (default: $SENTAUG_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect the prompt templates.
    #[command(subcommand)]
    Prompts(PromptsCommand),
    /// Convert a JSONL or delimited file into a canonical JSONL corpus.
    Ingest(IngestArgs),
    /// Generate augmented datasets through a chat backend.
    Augment(AugmentArgs),
    /// Build training-set combinations from a corpus and its augmentations.
    Combine(CombineArgs),
    /// Train the reference classifier over several seeds.
    Train(TrainArgs),
    /// Score a prediction file against a corpus's test split.
    Eval(EvalArgs),
    /// Measure inference latency.
    Bench(BenchArgs),
    /// Execute an experiment grid into a result store.
    Run(RunArgs),
    /// Render result and gain tables from a result store.
    Report(ReportArgs),
    /// Write a deterministic synthetic corpus.
    Fixture(FixtureArgs),
}

#[derive(Debug, Subcommand)]
pub enum PromptsCommand {
    /// Print the four templates verbatim.
    Show,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Canonical JSONL corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// `persent`, `multiemo`, or a comma-separated label list.
    #[arg(long, default_value = "persent")]
    pub label_set: String,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Delimited-table settings (TOML); without it the input is read as JSONL.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value = "persent")]
    pub label_set: String,
    /// Corpus name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Fail unless split sizes and class shares match a known dataset.
    #[arg(long)]
    pub profile: Option<String>,
    /// Output JSONL file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "para,para-conv,insp,insp-lab")]
    pub strategies: String,
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long, value_parser = parse_policy)]
    pub failure_policy: Option<FailurePolicy>,
    #[arg(long)]
    pub max_failure_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<FailurePolicy, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("expected strict, substitute_parent or drop, got {s:?}"))
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// Canonical JSONL corpus holding the original splits.
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long, default_value = "persent")]
    pub label_set: String,
    #[arg(long)]
    pub aug_dir: PathBuf,
    /// `all` or a combination name such as `both-para`.
    #[arg(long, default_value = "all")]
    pub spec: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "baseline")]
    pub combination: String,
    /// Augmentation directory; needed for every combination but Baseline.
    #[arg(long)]
    pub aug_dir: Option<PathBuf>,
    #[arg(long, default_value = "reference")]
    pub trainer: String,
    /// `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "0..4")]
    pub seeds: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// JSONL of `{id, label}` covering the test split.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Baseline predictions; adds a gain table.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `reference`, or `command` to time an external program.
    #[arg(long, default_value = "reference")]
    pub trainer: String,
    /// Program (and arguments) for `--trainer command`; reads JSON strings
    /// on stdin, writes one label per line.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    pub command: Vec<String>,
    /// Id recorded for an external command.
    #[arg(long)]
    pub model_id: Option<String>,
    /// Corpus to train on and draw samples from; a synthetic one otherwise.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "persent")]
    pub label_set: String,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Earlier bench reports (JSON) to rank against.
    #[arg(long, num_args = 1..)]
    pub compare: Vec<PathBuf>,
    /// Only rank the `--compare` reports.
    #[arg(long)]
    pub no_run: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rerun cells that already have results.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Stop after executing this many cells.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding store.jsonl.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub tables: bool,
    #[arg(long)]
    pub gains: bool,
    /// Output directory; defaults to the store directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    Separable,
    Synthetic,
    Persent,
    Multiemo,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, value_enum)]
    pub kind: FixtureKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/valid/test sizes for `synthetic`.
    #[arg(long, value_delimiter = ',', default_value = "60,20,20")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    pub words: usize,
    #[arg(long, default_value = "persent")]
    pub label_set: String,
}

/// Raised for invalid flag combinations the parser cannot express.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("error: {u}\n\nRun `sentaug --help` for usage.");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
