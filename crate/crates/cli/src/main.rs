//! `wackymeter`: index sparse representations, score expansion-token
//! wackiness, and run the curve, ablation and evaluation pipelines.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`.
//! Set `WACKYMETER_LOG=debug` for verbose logging.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "wackymeter", version, about = "Wackiness analysis for learned sparse retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Versioned TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to available cores). Never affects results.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus, queries, qrels and sparse vectors.
    Synth(commands::SynthArgs),
    /// Build lexical and impact indices.
    Index(commands::IndexArgs),
    /// Pool per-token vectors into one vector per input.
    Pool(commands::PoolArgs),
    /// Batch retrieval to a TREC run file.
    Search(commands::SearchArgs),
    /// Score expansion tokens and write the wackiness table.
    Wackiness(commands::WackinessArgs),
    /// Wackiness curve and W-AUC, optionally comparing models.
    Curve(commands::CurveArgs),
    /// Wacky vs random expansion-removal ablation.
    Ablate(commands::AblateArgs),
    /// Evaluate a run file against qrels.
    Eval(commands::EvalArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WACKYMETER_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Synth(a) => &a.common,
        Command::Index(a) => &a.common,
        Command::Pool(a) => &a.common,
        Command::Search(a) => &a.common,
        Command::Wackiness(a) => &a.common,
        Command::Curve(a) => &a.common,
        Command::Ablate(a) => &a.common,
        Command::Eval(a) => &a.common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Argument("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Index(a) => commands::index(a),
        Command::Pool(a) => commands::pool(a),
        Command::Search(a) => commands::search(a),
        Command::Wackiness(a) => commands::wackiness(a),
        Command::Curve(a) => commands::curve(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Eval(a) => commands::eval(a),
    }
}
