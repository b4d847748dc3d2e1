use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use topicrank::logdata::{
    filter_sessions, load_log, save_labeled, segment_sessions, split_dataset, DatasetStats,
};

use super::echo_resolved_config;
use super::synth::merge;
use crate::config::{RunConfig, RunPaths};

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Run directory; receives train/validation/test.jsonl and stats.txt.
    #[arg(long)]
    dir: PathBuf,

    /// Query log to prepare (default: log.jsonl in the run directory).
    #[arg(long)]
    log: Option<PathBuf>,

    #[arg(long)]
    session_gap: Option<f64>,
    #[arg(long)]
    dwell_threshold: Option<f64>,
    /// Comma-separated domain queries to drop, replacing the config list.
    #[arg(long, value_delimiter = ',')]
    blocklist: Option<Vec<String>>,
    #[arg(long)]
    split_seed: Option<u64>,
}

pub fn run(base: &RunConfig, args: &PrepareArgs) -> Result<()> {
    let mut config = base.clone();
    let p = &mut config.prepare;
    merge(&mut p.session_gap_seconds, args.session_gap);
    merge(&mut p.dwell_threshold_seconds, args.dwell_threshold);
    merge(&mut p.domain_blocklist, args.blocklist.clone());
    merge(&mut p.split_seed, args.split_seed);

    let paths = RunPaths::new(&args.dir);
    paths.ensure_dir()?;
    echo_resolved_config(&config, &paths)?;

    let log_path = args.log.clone().unwrap_or_else(|| paths.log());
    let entries = load_log(&log_path)?;
    let sessions = segment_sessions(&entries, config.prepare.session_gap_seconds)?;
    let blocklist: HashSet<String> = config.prepare.domain_blocklist.iter().cloned().collect();
    let filtered = filter_sessions(
        &sessions,
        config.prepare.dwell_threshold_seconds,
        &blocklist,
    );
    let split = split_dataset(&filtered, config.prepare.split_seed);

    save_labeled(paths.split("train"), &split.train)?;
    save_labeled(paths.split("validation"), &split.validation)?;
    save_labeled(paths.split("test"), &split.test)?;

    let stats = DatasetStats::compute(&filtered);
    let table = stats.render_table();
    std::fs::write(paths.stats(), &table)
        .with_context(|| format!("writing {}", paths.stats().display()))?;
    print!("{table}");
    println!(
        "split sizes: train={} validation={} test={}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}
