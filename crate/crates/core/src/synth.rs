//! Seeded synthetic query logs with planted user interests.
//!
//! Documents are drawn from an LDA-style process over planted topics (each
//! topic owns a vocabulary slice). Each user has a sparse interest over
//! topics; each entry's query targets a topic drawn from that interest, its
//! result list mixes on-topic and off-topic documents at shuffled ranks, and
//! the satisfied click lands on an on-topic result with probability
//! `1 - click_noise`. With probability `repeat_click_rate` an entry re-clicks
//! a previously clicked document (planted into the result list), which is
//! what gives the click-history baseline its signal. Result lists otherwise
//! never repeat a document the user has already clicked, so with
//! `repeat_click_rate = 0` the promoted set is always empty.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logdata::{Click, CorpusRecord, LogEntry};

/// Knobs for the generator. Defaults are desk scale: a pipeline run on them
/// finishes in seconds but still carries enough signal to separate the
/// methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_topics_true: usize,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub n_sessions_per_user: usize,
    pub entries_per_session: usize,
    pub n_results: usize,
    /// Weight of a user's primary topic relative to every other topic.
    pub user_interest_concentration: f64,
    /// Probability that a satisfied click ignores the query topic.
    pub click_noise: f64,
    /// Probability that an entry re-clicks a previously clicked document.
    pub repeat_click_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 20,
            n_topics_true: 8,
            vocab_size: 2000,
            n_docs: 2000,
            n_sessions_per_user: 6,
            entries_per_session: 4,
            n_results: 10,
            user_interest_concentration: 20.0,
            click_noise: 0.1,
            repeat_click_rate: 0.2,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// On-topic documents planted into each result list.
    fn on_interest_per_entry(&self) -> usize {
        self.n_results.min(3)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("n_users", self.n_users),
            ("vocab_size", self.vocab_size),
            ("n_docs", self.n_docs),
            ("n_sessions_per_user", self.n_sessions_per_user),
            ("entries_per_session", self.entries_per_session),
            ("n_results", self.n_results),
        ] {
            if value < 1 {
                return Err(Error::InvalidInput(format!("{name} must be at least 1")));
            }
        }
        if self.n_topics_true < 2 {
            return Err(Error::InvalidInput(
                "n_topics_true must be at least 2 so result lists can mix topics".into(),
            ));
        }
        for (name, p) in [
            ("click_noise", self.click_noise),
            ("repeat_click_rate", self.repeat_click_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a probability, got {p}"
                )));
            }
        }
        if !(self.user_interest_concentration > 0.0) {
            return Err(Error::InvalidInput(
                "user_interest_concentration must be positive".into(),
            ));
        }
        if self.vocab_size < self.n_topics_true * 5 {
            return Err(Error::InvalidInput(format!(
                "vocab_size {} too small for {} topics (need at least {})",
                self.vocab_size,
                self.n_topics_true,
                self.n_topics_true * 5
            )));
        }
        let docs_per_topic = self.n_docs / self.n_topics_true;
        if docs_per_topic < self.on_interest_per_entry() {
            return Err(Error::InvalidInput(format!(
                "config requests {} on-interest documents per entry but each topic only has {}",
                self.on_interest_per_entry(),
                docs_per_topic
            )));
        }
        if self.n_docs < self.n_results {
            return Err(Error::InvalidInput(format!(
                "n_docs {} smaller than n_results {}",
                self.n_docs, self.n_results
            )));
        }
        Ok(())
    }
}

/// What the generator planted, for test assertions only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Per-user interest distribution over the planted topics.
    pub user_interests: BTreeMap<String, Vec<f64>>,
    /// Dominant planted topic of each document.
    pub doc_topics: BTreeMap<String, usize>,
    /// Planted topic of each entry's query, keyed by `user_id@timestamp`.
    pub query_topics: BTreeMap<String, usize>,
}

impl GroundTruth {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::io(path, e.into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::parse(path, 0, e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Vec<CorpusRecord>,
    pub log: Vec<LogEntry>,
    pub ground_truth: GroundTruth,
}

const DOC_MIN_TOKENS: usize = 40;
const DOC_MAX_TOKENS: usize = 80;
const ON_TOPIC_TOKEN_PROB: f64 = 0.9;
const SHORT_CLICK_PROB: f64 = 0.3;
const ENTRY_SPACING_SECONDS: i64 = 120;
const SESSION_SPACING_SECONDS: i64 = 7200;
const BASE_TIMESTAMP: i64 = 1_700_000_000;

/// Generates a corpus, a query log, and the planted ground truth.
/// Deterministic given the seed: one sequential stream drives everything.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t = config.n_topics_true;
    let slice_len = config.vocab_size / t;

    let topic_word = |topic: usize, offset: usize| format!("w{:05}", topic * slice_len + offset);

    // Documents: a dominant topic each, assigned round-robin for balance.
    let mut corpus = Vec::with_capacity(config.n_docs);
    let mut doc_topics = BTreeMap::new();
    let mut docs_by_topic: Vec<Vec<String>> = vec![Vec::new(); t];
    for i in 0..config.n_docs {
        let topic = i % t;
        let doc_id = format!("d{i:05}");
        let len = rng.random_range(DOC_MIN_TOKENS..=DOC_MAX_TOKENS);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let word = if rng.random_bool(ON_TOPIC_TOKEN_PROB) {
                topic_word(topic, rng.random_range(0..slice_len))
            } else {
                let any_topic = rng.random_range(0..t);
                topic_word(any_topic, rng.random_range(0..slice_len))
            };
            words.push(word);
        }
        corpus.push(CorpusRecord {
            doc_id: doc_id.clone(),
            text: words.join(" "),
        });
        docs_by_topic[topic].push(doc_id.clone());
        doc_topics.insert(doc_id, topic);
    }

    // Users: primary topic round-robin, interest mass concentrated on it.
    let mut user_interests = BTreeMap::new();
    let users: Vec<String> = (0..config.n_users).map(|i| format!("u{i:03}")).collect();
    for (i, user) in users.iter().enumerate() {
        let primary = i % t;
        let mut interest = vec![1.0; t];
        interest[primary] = config.user_interest_concentration;
        let sum: f64 = interest.iter().sum();
        for w in &mut interest {
            *w /= sum;
        }
        user_interests.insert(user.clone(), interest);
    }

    let on_count = config.on_interest_per_entry();
    let mut log = Vec::new();
    let mut query_topics = BTreeMap::new();
    for user in &users {
        let interest = &user_interests[user];
        let mut clicked: HashSet<String> = HashSet::new();
        let mut clicked_order: Vec<String> = Vec::new();
        for session in 0..config.n_sessions_per_user {
            let session_start = BASE_TIMESTAMP
                + session as i64
                    * (config.entries_per_session as i64 * ENTRY_SPACING_SECONDS
                        + SESSION_SPACING_SECONDS);
            for slot in 0..config.entries_per_session {
                let timestamp = session_start + slot as i64 * ENTRY_SPACING_SECONDS;
                let query_topic = sample_index(interest, &mut rng);

                // Result list: planted on-topic docs plus off-topic filler,
                // never re-using a doc this user already clicked.
                let on_pool: Vec<&String> = docs_by_topic[query_topic]
                    .iter()
                    .filter(|d| !clicked.contains(*d))
                    .collect();
                if on_pool.len() < on_count {
                    return Err(Error::InvalidInput(format!(
                        "topic {query_topic} has {} unclicked on-interest documents, need {on_count}; \
                         grow n_docs or shrink the log",
                        on_pool.len()
                    )));
                }
                let mut results: Vec<String> = pick_distinct(&on_pool, on_count, &mut rng);
                let off_needed = config.n_results - on_count.min(config.n_results);
                if off_needed > 0 {
                    let off_pool: Vec<&String> = (0..t)
                        .filter(|topic| *topic != query_topic)
                        .flat_map(|topic| docs_by_topic[topic].iter())
                        .filter(|d| !clicked.contains(*d))
                        .collect();
                    if off_pool.len() < off_needed {
                        return Err(Error::InvalidInput(format!(
                            "only {} unclicked off-interest documents left, need {off_needed}",
                            off_pool.len()
                        )));
                    }
                    results.extend(pick_distinct(&off_pool, off_needed, &mut rng));
                }
                results.shuffle(&mut rng);

                // Optionally plant a previously clicked doc in an off-topic
                // slot; its re-click is what the CI baseline can exploit.
                let mut repeat_doc = None;
                if !clicked_order.is_empty() && rng.random_bool(config.repeat_click_rate) {
                    let off_slots: Vec<usize> = results
                        .iter()
                        .enumerate()
                        .filter(|(_, d)| doc_topics[*d] != query_topic)
                        .map(|(i, _)| i)
                        .collect();
                    if let Some(&slot) = pick_one(&off_slots, &mut rng) {
                        let doc = clicked_order[rng.random_range(0..clicked_order.len())].clone();
                        results[slot] = doc.clone();
                        repeat_doc = Some(doc);
                    }
                }

                let position_of = |doc: &str, results: &[String]| {
                    results.iter().position(|r| r == doc).unwrap() + 1
                };

                let mut clicks = Vec::new();
                // A fraction of entries carries an extra short click.
                if rng.random_bool(SHORT_CLICK_PROB) {
                    let doc = results[rng.random_range(0..results.len())].clone();
                    clicks.push(Click {
                        position: position_of(&doc, &results),
                        dwell_seconds: rng.random_range(1.0..29.0),
                        doc_id: doc,
                    });
                }
                if let Some(doc) = &repeat_doc {
                    clicks.push(Click {
                        position: position_of(doc, &results),
                        dwell_seconds: rng.random_range(30.0..300.0),
                        doc_id: doc.clone(),
                    });
                }
                // The satisfied click, last in the entry.
                let on_results: Vec<&String> = results
                    .iter()
                    .filter(|d| doc_topics[*d] == query_topic)
                    .collect();
                let target = if !on_results.is_empty() && !rng.random_bool(config.click_noise) {
                    (*pick_one(&on_results, &mut rng).unwrap()).clone()
                } else {
                    results[rng.random_range(0..results.len())].clone()
                };
                clicks.push(Click {
                    position: position_of(&target, &results),
                    dwell_seconds: rng.random_range(30.0..300.0),
                    doc_id: target,
                });

                for click in &clicks {
                    if clicked.insert(click.doc_id.clone()) {
                        clicked_order.push(click.doc_id.clone());
                    }
                }

                let entry = LogEntry {
                    user_id: user.clone(),
                    timestamp,
                    query_text: format!(
                        "t{query_topic} {} {}",
                        topic_word(query_topic, rng.random_range(0..slice_len)),
                        topic_word(query_topic, rng.random_range(0..slice_len)),
                    ),
                    results,
                    clicks,
                };
                query_topics.insert(entry.key().to_string(), query_topic);
                log.push(entry);
            }
        }
    }

    Ok(SynthOutput {
        corpus,
        log,
        ground_truth: GroundTruth {
            user_interests,
            doc_topics,
            query_topics,
        },
    })
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn pick_one<'a, T>(items: &'a [T], rng: &mut ChaCha8Rng) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

fn pick_distinct(pool: &[&String], count: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let picked = rand::seq::index::sample(rng, pool.len(), count);
    picked.iter().map(|i| pool[i].clone()).collect()
}
