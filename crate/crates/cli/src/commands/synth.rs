use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use topicrank::logdata::{save_corpus_records, save_log};
use topicrank::synth::{generate, SynthConfig};

use super::echo_resolved_config;
use crate::config::{RunConfig, RunPaths};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Run directory; receives corpus.jsonl, log.jsonl, ground_truth.json.
    #[arg(long)]
    dir: PathBuf,

    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    docs: Option<usize>,
    #[arg(long)]
    sessions_per_user: Option<usize>,
    #[arg(long)]
    entries_per_session: Option<usize>,
    #[arg(long)]
    results: Option<usize>,
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    click_noise: Option<f64>,
    #[arg(long)]
    repeat_click_rate: Option<f64>,
}

pub fn run(base: &RunConfig, args: &SynthArgs) -> Result<()> {
    let mut config = base.clone();
    let s = &mut config.synth;
    merge(&mut s.seed, args.seed);
    merge(&mut s.n_users, args.users);
    merge(&mut s.n_topics_true, args.topics);
    merge(&mut s.vocab_size, args.vocab_size);
    merge(&mut s.n_docs, args.docs);
    merge(&mut s.n_sessions_per_user, args.sessions_per_user);
    merge(&mut s.entries_per_session, args.entries_per_session);
    merge(&mut s.n_results, args.results);
    merge(&mut s.user_interest_concentration, args.concentration);
    merge(&mut s.click_noise, args.click_noise);
    merge(&mut s.repeat_click_rate, args.repeat_click_rate);

    let paths = RunPaths::new(&args.dir);
    paths.ensure_dir()?;
    echo_resolved_config(&config, &paths)?;

    let synth_config: SynthConfig = (&config.synth).into();
    let out = generate(&synth_config)?;
    save_corpus_records(paths.corpus(), &out.corpus)?;
    save_log(paths.log(), &out.log)?;
    out.ground_truth
        .save(paths.ground_truth())
        .with_context(|| "writing ground truth")?;

    println!(
        "wrote {} documents, {} log entries to {}",
        out.corpus.len(),
        out.log.len(),
        args.dir.display()
    );
    Ok(())
}

pub(super) fn merge<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
