use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use topicrank::embeddings::{build_store, with_queries, EmbeddingStore, StoreBuildParams};
use topicrank::eval::evaluate;
use topicrank::lda::{train_lda, TopicModel};
use topicrank::logdata::{load_corpus, load_labeled, Corpus, DatasetSplit, LabeledEntry, LogEntry};
use topicrank::profile::{save_profiles, train_profiles, NormOrder, TrainConfig, UserProfile};
use topicrank::rerank::rerank_all;

use super::echo_resolved_config;
use super::synth::merge;
use crate::config::{RunConfig, RunPaths, TrainSection};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run directory holding the splits; receives model.json,
    /// embeddings.json, and the profiles file.
    #[arg(long)]
    dir: PathBuf,

    /// Corpus file (default: corpus.jsonl in the run directory).
    #[arg(long)]
    corpus: Option<PathBuf>,

    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lda_iterations: Option<usize>,
    #[arg(long)]
    infer_iterations: Option<usize>,
    #[arg(long)]
    infer_burn_in: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Norm in the score function: l1 or l2.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs_per_phase: Option<usize>,
    #[arg(long)]
    negatives_per_positive: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,

    /// Freeze both projection matrices at identity (the simplified model).
    #[arg(long)]
    ablation_identity_w: bool,

    /// Grid-search candidates; the combination with the highest validation
    /// MRR wins. Each flag takes a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    grid_k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    grid_delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grid_eta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grid_gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grid_norm: Option<Vec<String>>,
}

pub fn run(base: &RunConfig, args: &TrainArgs) -> Result<()> {
    let mut config = base.clone();
    let t = &mut config.train;
    merge(&mut t.k, args.k);
    merge(&mut t.alpha, args.alpha.map(Some));
    merge(&mut t.beta, args.beta);
    merge(&mut t.lda_iterations, args.lda_iterations);
    merge(&mut t.infer_iterations, args.infer_iterations);
    merge(&mut t.infer_burn_in, args.infer_burn_in);
    merge(&mut t.delta, args.delta);
    merge(&mut t.norm, args.norm.clone());
    merge(&mut t.eta, args.eta);
    merge(&mut t.gamma, args.gamma);
    merge(&mut t.epochs_per_phase, args.epochs_per_phase);
    merge(&mut t.negatives_per_positive, args.negatives_per_positive);
    merge(&mut t.seed, args.seed);
    t.ablation_identity_w |= args.ablation_identity_w;

    let paths = RunPaths::new(&args.dir);
    paths.ensure_dir()?;
    echo_resolved_config(&config, &paths)?;

    let corpus_path = args.corpus.clone().unwrap_or_else(|| paths.corpus());
    let corpus = load_corpus(&corpus_path)?;
    let split = DatasetSplit {
        train: load_labeled(paths.split("train"))?,
        validation: load_labeled(paths.split("validation"))?,
        test: load_labeled(paths.split("test"))?,
    };
    if split.train.is_empty() {
        bail!("train split is empty; run `prepare` first");
    }

    let grid = Grid::from_args(&config.train, args)?;
    let outcome = if grid.is_single() {
        fit(&config.train, &grid.single(), &corpus, &split)?
    } else {
        search(&config.train, &grid, &corpus, &split)?
    };

    outcome.model.save(paths.model())?;
    outcome.store.save(paths.embeddings())?;
    let profile_path = paths.profiles(config.train.ablation_identity_w);
    save_profiles(&profile_path, &outcome.profiles, &outcome.train_config)?;
    println!(
        "trained k={} delta={} norm={} eta={} gamma={}; {} profiles -> {}",
        outcome.combo.k,
        outcome.combo.delta,
        outcome.combo.norm,
        outcome.combo.eta,
        outcome.combo.gamma,
        outcome.profiles.len(),
        profile_path.display()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Combo {
    k: usize,
    delta: f64,
    eta: f64,
    gamma: f64,
    norm: NormOrder,
}

struct Grid {
    k: Vec<usize>,
    delta: Vec<f64>,
    eta: Vec<f64>,
    gamma: Vec<f64>,
    norm: Vec<NormOrder>,
}

impl Grid {
    fn from_args(section: &TrainSection, args: &TrainArgs) -> Result<Self> {
        let norm = match &args.grid_norm {
            Some(list) => list
                .iter()
                .map(|s| s.parse::<NormOrder>().map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()?,
            None => vec![section.norm_order()?],
        };
        Ok(Grid {
            k: args.grid_k.clone().unwrap_or_else(|| vec![section.k]),
            delta: args
                .grid_delta
                .clone()
                .unwrap_or_else(|| vec![section.delta]),
            eta: args.grid_eta.clone().unwrap_or_else(|| vec![section.eta]),
            gamma: args
                .grid_gamma
                .clone()
                .unwrap_or_else(|| vec![section.gamma]),
            norm,
        })
    }

    fn is_single(&self) -> bool {
        self.k.len() == 1
            && self.delta.len() == 1
            && self.eta.len() == 1
            && self.gamma.len() == 1
            && self.norm.len() == 1
    }

    fn single(&self) -> Combo {
        Combo {
            k: self.k[0],
            delta: self.delta[0],
            eta: self.eta[0],
            gamma: self.gamma[0],
            norm: self.norm[0],
        }
    }
}

struct FitOutcome {
    combo: Combo,
    model: TopicModel,
    store: EmbeddingStore,
    profiles: BTreeMap<String, UserProfile>,
    train_config: TrainConfig,
}

/// Documents that received a SAT click anywhere in the prepared dataset;
/// the topic model trains on these only.
fn sat_document_ids(split: &DatasetSplit) -> HashSet<String> {
    split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .flat_map(|le| le.positive_docs().into_iter().map(str::to_string))
        .collect()
}

fn relevant_subcorpus(corpus: &Corpus, sat_ids: &HashSet<String>) -> Result<Corpus> {
    let mut docs = Vec::new();
    for doc in &corpus.docs {
        if !sat_ids.contains(&doc.doc_id) {
            continue;
        }
        if doc.tokens.is_empty() {
            log::warn!(
                "SAT-clicked document {} has no usable tokens; excluded from topic training",
                doc.doc_id
            );
            continue;
        }
        docs.push(doc.clone());
    }
    if docs.is_empty() {
        bail!("no SAT-clicked documents with tokens; cannot train the topic model");
    }
    Ok(Corpus {
        docs,
        vocab: corpus.vocab.clone(),
    })
}

fn all_entries(split: &DatasetSplit) -> Vec<LogEntry> {
    split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .map(|le| le.entry.clone())
        .collect()
}

fn fit(
    section: &TrainSection,
    combo: &Combo,
    corpus: &Corpus,
    split: &DatasetSplit,
) -> Result<FitOutcome> {
    let (model, store) = fit_embeddings(section, combo, corpus, split)?;
    let (profiles, train_config) = fit_profiles(section, combo, &store, split)?;
    Ok(FitOutcome {
        combo: combo.clone(),
        model,
        store,
        profiles,
        train_config,
    })
}

fn fit_embeddings(
    section: &TrainSection,
    combo: &Combo,
    corpus: &Corpus,
    split: &DatasetSplit,
) -> Result<(TopicModel, EmbeddingStore)> {
    let mut lda_params = section.lda_params();
    lda_params.k = combo.k;
    if section.alpha.is_none() {
        lda_params.alpha = 50.0 / combo.k as f64;
    }
    let sat_ids = sat_document_ids(split);
    let relevant = relevant_subcorpus(corpus, &sat_ids)?;
    log::info!(
        "training LDA: k={}, {} relevant documents, {} iterations",
        lda_params.k,
        relevant.docs.len(),
        lda_params.iterations
    );
    let model = train_lda(&relevant, &lda_params)?;
    let store = build_store(
        &model,
        corpus,
        &all_entries(split),
        &StoreBuildParams {
            infer: section.infer_params(),
            delta: combo.delta,
            seed: section.seed,
        },
    )?;
    Ok((model, store))
}

fn fit_profiles(
    section: &TrainSection,
    combo: &Combo,
    store: &EmbeddingStore,
    split: &DatasetSplit,
) -> Result<(BTreeMap<String, UserProfile>, TrainConfig)> {
    let train_config = TrainConfig {
        norm_order: combo.norm,
        gamma: combo.gamma,
        eta: combo.eta,
        epochs_per_phase: section.epochs_per_phase,
        negatives_per_positive: section.negatives_per_positive,
        seed: section.seed,
    };
    let (profiles, report) = train_profiles(split, store, &train_config, section.ablation_identity_w)?;
    if let (Some(first), Some(last)) = (
        report.phase1_epoch_loss.first(),
        report.phase1_epoch_loss.last(),
    ) {
        log::info!("phase-1 epoch loss {first:.3} -> {last:.3}");
    }
    Ok((profiles, train_config))
}

fn validation_mrr(
    store: &EmbeddingStore,
    profiles: &BTreeMap<String, UserProfile>,
    norm: NormOrder,
    validation: &[LabeledEntry],
) -> Result<f64> {
    let entries: Vec<LogEntry> = validation.iter().map(|le| le.entry.clone()).collect();
    let rankings = rerank_all(profiles, &entries, store, norm)?;
    let labels = validation
        .iter()
        .map(|le| {
            (
                le.entry.key(),
                le.positive_docs().into_iter().map(str::to_string).collect(),
            )
        })
        .collect();
    let report = evaluate(&[("Ours".to_string(), rankings)].into(), &labels)?;
    Ok(report.methods["Ours"].mrr)
}

fn search(section: &TrainSection, grid: &Grid, corpus: &Corpus, split: &DatasetSplit) -> Result<FitOutcome> {
    if split.validation.is_empty() {
        bail!("grid search needs a non-empty validation split");
    }
    let mut best: Option<(f64, FitOutcome)> = None;
    for &k in &grid.k {
        let mut base_store: Option<EmbeddingStore> = None;
        let mut model: Option<TopicModel> = None;
        for &delta in &grid.delta {
            let combo_base = Combo {
                k,
                delta,
                eta: grid.eta[0],
                gamma: grid.gamma[0],
                norm: grid.norm[0],
            };
            let store = match (&model, &base_store) {
                (Some(_), Some(prev)) => with_queries(prev, &all_entries(split), delta)?,
                _ => {
                    let (m, s) = fit_embeddings(section, &combo_base, corpus, split)?;
                    model = Some(m);
                    base_store = Some(s.clone());
                    s
                }
            };
            for &eta in &grid.eta {
                for &gamma in &grid.gamma {
                    for &norm in &grid.norm {
                        let combo = Combo {
                            k,
                            delta,
                            eta,
                            gamma,
                            norm,
                        };
                        let (profiles, train_config) =
                            fit_profiles(section, &combo, &store, split)?;
                        let mrr = validation_mrr(&store, &profiles, norm, &split.validation)?;
                        println!(
                            "grid: k={k} delta={delta} norm={norm} eta={eta} gamma={gamma} -> validation MRR {mrr:.4}"
                        );
                        let better = best.as_ref().map_or(true, |(b, _)| mrr > *b);
                        if better {
                            best = Some((
                                mrr,
                                FitOutcome {
                                    combo,
                                    model: model.clone().expect("model built"),
                                    store: store.clone(),
                                    profiles,
                                    train_config,
                                },
                            ));
                        }
                    }
                }
            }
        }
    }
    let (mrr, outcome) = best.expect("grid is non-empty");
    println!(
        "selected k={} delta={} norm={} eta={} gamma={} (validation MRR {mrr:.4})",
        outcome.combo.k, outcome.combo.delta, outcome.combo.norm, outcome.combo.eta, outcome.combo.gamma
    );
    Ok(outcome)
}
