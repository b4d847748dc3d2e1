//! Re-ranking the engine's result list, plus the SE and CI baselines.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::logdata::{LogEntry, QueryKey};
use crate::par::{map_batch, map_batch_seq};
use crate::profile::{score, NormOrder, UserProfile};

/// A (re-)ordering of one entry's results. `doc_ids` is always a permutation
/// of the source entry's result list; `scores` runs parallel to it when the
/// method produced scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entry_key: QueryKey,
    pub doc_ids: Vec<String>,
    pub scores: Option<Vec<f64>>,
}

/// Orders the entry's documents by ascending implausibility under the
/// user's profile. Ties keep the engine's original order.
pub fn rerank_entry(
    profile: &UserProfile,
    entry: &LogEntry,
    store: &EmbeddingStore,
    norm_order: NormOrder,
) -> Result<Ranking> {
    let key = entry.key();
    let v_q = store
        .query(&key)
        .ok_or_else(|| Error::MissingEmbedding(format!("query {key}")))?;
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(entry.results.len());
    for doc_id in &entry.results {
        let v_d = store
            .doc(doc_id)
            .ok_or_else(|| Error::MissingEmbedding(format!("document {doc_id}")))?;
        scored.push((doc_id.clone(), score(profile, v_q, v_d, norm_order)?));
    }
    // Stable sort: equal scores fall back to SE rank.
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (doc_ids, scores) = scored.into_iter().unzip();
    Ok(Ranking {
        entry_key: key,
        doc_ids,
        scores: Some(scores),
    })
}

/// The search engine's original order, unchanged and unscored.
pub fn baseline_se(entry: &LogEntry) -> Ranking {
    Ranking {
        entry_key: entry.key(),
        doc_ids: entry.results.clone(),
        scores: None,
    }
}

/// Promotes results the user clicked before this entry, preserving relative
/// order inside both the promoted and unpromoted groups.
pub fn baseline_ci(entry: &LogEntry, user_history: &HashSet<String>) -> Ranking {
    let (promoted, rest): (Vec<String>, Vec<String>) = entry
        .results
        .iter()
        .cloned()
        .partition(|doc| user_history.contains(doc));
    let mut doc_ids = promoted;
    doc_ids.extend(rest);
    Ranking {
        entry_key: entry.key(),
        doc_ids,
        scores: None,
    }
}

/// Docs each user clicked strictly before each entry, assembled from the
/// raw log (all clicks count, SAT or not).
#[derive(Debug, Default, Clone)]
pub struct ClickHistories {
    by_entry: HashMap<QueryKey, HashSet<String>>,
}

impl ClickHistories {
    /// Builds per-entry histories from the full (unfiltered) log.
    pub fn build(entries: &[LogEntry]) -> Self {
        let mut by_user: BTreeMap<&str, Vec<&LogEntry>> = BTreeMap::new();
        for entry in entries {
            by_user.entry(&entry.user_id).or_default().push(entry);
        }
        let mut by_entry = HashMap::new();
        for user_entries in by_user.values_mut() {
            user_entries.sort_by_key(|e| e.timestamp);
            // Clicks at equal timestamps are not "strictly before": group by
            // timestamp and snapshot the history before absorbing the group.
            let mut history: HashSet<String> = HashSet::new();
            let mut i = 0;
            while i < user_entries.len() {
                let ts = user_entries[i].timestamp;
                let mut j = i;
                while j < user_entries.len() && user_entries[j].timestamp == ts {
                    by_entry.insert(user_entries[j].key(), history.clone());
                    j += 1;
                }
                for entry in &user_entries[i..j] {
                    for click in &entry.clicks {
                        history.insert(click.doc_id.clone());
                    }
                }
                i = j;
            }
        }
         ClickHistories { by_entry }
    }

    pub fn before(&self, key: &QueryKey) -> Option<&HashSet<String>> {
        self.by_entry.get(key)
    }
}

/// Re-ranks a batch of entries with their owners' profiles; parallel under
/// the `parallel` feature.
pub fn rerank_all(
    profiles: &BTreeMap<String, UserProfile>,
    entries: &[LogEntry],
    store: &EmbeddingStore,
    norm_order: NormOrder,
) -> Result<Vec<Ranking>> {
    map_batch(entries, |entry| rerank_one(profiles, entry, store, norm_order))
        .into_iter()
        .collect()
}

/// Sequential reference path for `rerank_all`.
pub fn rerank_all_seq(
    profiles: &BTreeMap<String, UserProfile>,
    entries: &[LogEntry],
    store: &EmbeddingStore,
    norm_order: NormOrder,
) -> Result<Vec<Ranking>> {
    map_batch_seq(entries, |entry| rerank_one(profiles, entry, store, norm_order))
        .into_iter()
        .collect()
}

fn rerank_one(
    profiles: &BTreeMap<String, UserProfile>,
    entry: &LogEntry,
    store: &EmbeddingStore,
    norm_order: NormOrder,
) -> Result<Ranking> {
    let profile = profiles
        .get(&entry.user_id)
        .ok_or_else(|| Error::MissingEmbedding(format!("profile for user {}", entry.user_id)))?;
    rerank_entry(profile, entry, store, norm_order)
}

/// Writes rankings one record per line.
pub fn save_rankings(path: impl AsRef<Path>, rankings: &[Ranking]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ranking in rankings {
        serde_json::to_writer(&mut w, ranking).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
