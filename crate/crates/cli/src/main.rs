//! Pipeline driver: `synth` makes a seeded synthetic log, `prepare` turns a
//! log into labeled train/validation/test splits, `train` fits the topic
//! model, embeddings, and per-user profiles, and `evaluate` compares the
//! re-ranking methods on the test split.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "topicrank", version, about, propagate_version = true)]
struct Cli {
    /// Pipeline config file (TOML); flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, query log, and ground-truth sidecar.
    Synth(commands::synth::SynthArgs),
    /// Segment, label, filter, and split a query log.
    Prepare(commands::prepare::PrepareArgs),
    /// Train the topic model, build embeddings, and fit user profiles.
    Train(commands::train::TrainArgs),
    /// Re-rank the test split with each method and report MRR / P@1.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        init_thread_pool(threads)?;
    }

    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };

    match cli.command {
        Command::Synth(args) => commands::synth::run(&base, &args),
        Command::Prepare(args) => commands::prepare::run(&base, &args),
        Command::Train(args) => commands::train::run(&base, &args),
        Command::Evaluate(args) => commands::evaluate::run(&base, &args),
    }
}

#[cfg(feature = "parallel")]
fn init_thread_pool(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow::anyhow!("configuring thread pool: {e}"))
}

#[cfg(not(feature = "parallel"))]
fn init_thread_pool(_threads: usize) -> Result<()> {
    log::warn!("built without the `parallel` feature; --threads has no effect");
    Ok(())
}
