use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use topicrank::embeddings::EmbeddingStore;
use topicrank::eval::{evaluate, EvalReport};
use topicrank::logdata::{load_labeled, load_log, LogEntry, QueryKey};
use topicrank::profile::load_profiles;
use topicrank::rerank::{baseline_ci, baseline_se, rerank_all, save_rankings, ClickHistories, Ranking};

use super::echo_resolved_config;
use crate::config::{RunConfig, RunPaths};

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Run directory; receives report.txt, report.json, and per-method
    /// ranking files.
    #[arg(long)]
    dir: PathBuf,

    /// Raw query log for building click histories (default: log.jsonl in
    /// the run directory).
    #[arg(long)]
    log: Option<PathBuf>,

    /// Embedding store (default: embeddings.json in the run directory).
    #[arg(long)]
    embeddings: Option<PathBuf>,

    /// Trained profiles for the `ours` method (default: profiles.json).
    #[arg(long)]
    profiles: Option<PathBuf>,

    /// Trained identity-matrix profiles for `ours-no-w`
    /// (default: profiles_ablation.json).
    #[arg(long)]
    ablation_profiles: Option<PathBuf>,

    /// Comma-separated methods to run: se, ci, ours, ours-no-w.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    /// Also write the per-query reciprocal-rank arrays.
    #[arg(long)]
    per_query: bool,
}

pub fn run(base: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let mut config = base.clone();
    if let Some(methods) = &args.methods {
        config.evaluate.methods = methods.clone();
    }
    config.evaluate.per_query |= args.per_query;

    let paths = RunPaths::new(&args.dir);
    paths.ensure_dir()?;
    echo_resolved_config(&config, &paths)?;

    let test = load_labeled(paths.split("test"))?;
    if test.is_empty() {
        bail!("test split is empty; run `prepare` first");
    }
    let entries: Vec<LogEntry> = test.iter().map(|le| le.entry.clone()).collect();
    let labels: BTreeMap<QueryKey, HashSet<String>> = test
        .iter()
        .map(|le| {
            (
                le.entry.key(),
                le.positive_docs().into_iter().map(str::to_string).collect(),
            )
        })
        .collect();

    let mut methods: BTreeMap<String, Vec<Ranking>> = BTreeMap::new();
    for token in &config.evaluate.methods {
        let (name, rankings) = match token.as_str() {
            "se" => ("SE".to_string(), entries.iter().map(baseline_se).collect()),
            "ci" => ("CI".to_string(), ci_rankings(args, &paths, &entries)?),
            "ours" => (
                "Ours".to_string(),
                profile_rankings(
                    &args.profiles.clone().unwrap_or_else(|| paths.profiles(false)),
                    args,
                    &paths,
                    &entries,
                )?,
            ),
            "ours-no-w" => (
                "Ours-noW".to_string(),
                profile_rankings(
                    &args
                        .ablation_profiles
                        .clone()
                        .unwrap_or_else(|| paths.profiles(true)),
                    args,
                    &paths,
                    &entries,
                )?,
            ),
            other => bail!("unknown method {other:?}; expected se, ci, ours, ours-no-w"),
        };
        if methods.insert(name.clone(), rankings).is_some() {
            bail!("method {name:?} requested twice");
        }
    }
    if methods.is_empty() {
        bail!("no methods requested");
    }

    let report = evaluate(&methods, &labels)?;
    write_outputs(&report, &methods, &config, &paths)?;
    Ok(())
}

fn ci_rankings(
    args: &EvaluateArgs,
    paths: &RunPaths,
    entries: &[LogEntry],
) -> Result<Vec<Ranking>> {
    let log_path = args.log.clone().unwrap_or_else(|| paths.log());
    let log = load_log(&log_path)?;
    let histories = ClickHistories::build(&log);
    let empty = HashSet::new();
    Ok(entries
        .iter()
        .map(|entry| {
            let history = histories.before(&entry.key()).unwrap_or(&empty);
            baseline_ci(entry, history)
        })
        .collect())
}

fn profile_rankings(
    profile_path: &PathBuf,
    args: &EvaluateArgs,
    paths: &RunPaths,
    entries: &[LogEntry],
) -> Result<Vec<Ranking>> {
    let store_path = args.embeddings.clone().unwrap_or_else(|| paths.embeddings());
    let store = EmbeddingStore::load(&store_path)?;
    let (profiles, train_config) = load_profiles(profile_path)
        .with_context(|| format!("loading profiles from {}", profile_path.display()))?;
    Ok(rerank_all(
        &profiles,
        entries,
        &store,
        train_config.norm_order,
    )?)
}

fn write_outputs(
    report: &EvalReport,
    methods: &BTreeMap<String, Vec<Ranking>>,
    config: &RunConfig,
    paths: &RunPaths,
) -> Result<()> {
    let table = report.render_table();
    std::fs::write(paths.report_text(), &table)
        .with_context(|| format!("writing {}", paths.report_text().display()))?;
    print!("{table}");

    let json = serde_json::to_string_pretty(&report.methods)?;
    std::fs::write(paths.report_json(), json)
        .with_context(|| format!("writing {}", paths.report_json().display()))?;

    for (name, rankings) in methods {
        save_rankings(paths.rankings(&name.to_lowercase()), rankings)?;
    }

    if config.evaluate.per_query {
        let json = serde_json::to_string_pretty(&report.per_query_rr)?;
        std::fs::write(paths.per_query(), json)
            .with_context(|| format!("writing {}", paths.per_query().display()))?;
    }
    Ok(())
}
