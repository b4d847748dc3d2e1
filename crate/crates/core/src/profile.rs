//! Per-user profiles and their training.
//!
//! A profile is a user embedding `v_u` plus two k x k projection matrices:
//! one applied to the query embedding, one to the document embedding. The
//! implausibility score of a (query, user, document) triple is
//! `||W1*v_q + v_u - W2*v_d||` in the l1 or l2 norm; relevant documents
//! should score lower than irrelevant ones, which training enforces through
//! a margin objective over corrupted triples.
//!
//! Training runs in two phases: first the matrices are frozen at identity
//! and only `v_u` is learned, then everything is fine-tuned together. The
//! simplified ablation stops after the first phase, leaving the matrices at
//! identity. Norm constraints (`||v_u||_2 <= 1`, `||W1*v_q||_2 <= 1`,
//! `||W2*v_d||_2 <= 1`) are enforced by projection after each step.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::lda::TopicVector;
use crate::logdata::{DatasetSplit, LabeledEntry, QueryKey};
use crate::par::{derive_seed, map_batch, map_batch_seq};

/// Which norm the score function uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormOrder {
    L1,
    L2,
}

impl NormOrder {
    fn apply(self, r: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => r.iter().map(|x| x.abs()).sum(),
            NormOrder::L2 => r.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// (Sub)gradient of the norm at `r`. For l1 the sign subgradient with
    /// sign(0) = 0; for l2 the direction `r/||r||`, zero at the origin.
    fn subgradient(self, r: &[f64]) -> Vec<f64> {
        match self {
            NormOrder::L1 => r
                .iter()
                .map(|x| {
                    if *x > 0.0 {
                        1.0
                    } else if *x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            NormOrder::L2 => {
                let norm = self.apply(r);
                if norm == 0.0 {
                    vec![0.0; r.len()]
                } else {
                    r.iter().map(|x| x / norm).collect()
                }
            }
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::L1 => write!(f, "l1"),
            NormOrder::L2 => write!(f, "l2"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "l1" | "1" => Ok(NormOrder::L1),
            "l2" | "2" => Ok(NormOrder::L2),
            other => Err(Error::InvalidInput(format!(
                "unknown norm order {other:?}, expected l1 or l2"
            ))),
        }
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    k: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Matrix { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.k + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.k);
        self.data
            .chunks_exact(self.k)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    /// `self -= coeff * g v^T`.
    fn sub_outer(&mut self, coeff: f64, g: &[f64], v: &[f64]) {
        for (row, gi) in g.iter().enumerate() {
            let base = row * self.k;
            for (col, vj) in v.iter().enumerate() {
                self.data[base + col] -= coeff * gi * vj;
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.data.iter().enumerate().all(|(idx, x)| {
            let (row, col) = (idx / self.k, idx % self.k);
            *x == if row == col { 1.0 } else { 0.0 }
        })
    }
}

/// The learned personalization model for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub v_u: Vec<f64>,
    pub w1: Matrix,
    pub w2: Matrix,
}

impl UserProfile {
    /// The no-op profile: zero embedding, identity matrices. Scores reduce
    /// to the plain distance between query and document vectors.
    pub fn default_for(user_id: impl Into<String>, k: usize) -> Self {
        UserProfile {
            user_id: user_id.into(),
            v_u: vec![0.0; k],
            w1: Matrix::identity(k),
            w2: Matrix::identity(k),
        }
    }

    pub fn k(&self) -> usize {
        self.v_u.len()
    }
}

/// A (query, user, document) training instance; corrupted triples share the
/// same shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub query_key: QueryKey,
    pub user_id: String,
    pub doc_id: String,
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub norm_order: NormOrder,
    pub gamma: f64,
    pub eta: f64,
    pub epochs_per_phase: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            norm_order: NormOrder::L1,
            gamma: 5.0,
            eta: 0.005,
            epochs_per_phase: 200,
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.epochs_per_phase == 0 {
            return Err(Error::InvalidInput("epochs_per_phase must be >= 1".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::InvalidInput(
                "negatives_per_positive must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Score and loss

fn residual(profile: &UserProfile, v_q: &[f64], v_d: &[f64]) -> Vec<f64> {
    let mut r = profile.w1.matvec(v_q);
    let wd = profile.w2.matvec(v_d);
    for ((ri, ui), di) in r.iter_mut().zip(&profile.v_u).zip(&wd) {
        *ri += ui - di;
    }
    r
}

/// Implausibility of a triple: `||W1*v_q + v_u - W2*v_d||`. Lower means the
/// document better matches the user's interest-projected query.
pub fn score(
    profile: &UserProfile,
    v_q: &TopicVector,
    v_d: &TopicVector,
    norm_order: NormOrder,
) -> Result<f64> {
    let k = profile.k();
    if v_q.len() != k || v_d.len() != k || profile.w1.k() != k || profile.w2.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: if v_q.len() != k { v_q.len() } else { v_d.len() },
        });
    }
    Ok(norm_order.apply(&residual(profile, v_q.values(), v_d.values())))
}

/// Margin hinge: `max(0, gamma + f_pos - f_neg)`.
pub fn hinge_loss(f_pos: f64, f_neg: f64, gamma: f64) -> f64 {
    (gamma + f_pos - f_neg).max(0.0)
}

/// Query/document vectors of one triple, resolved from the store.
#[derive(Debug, Clone, Copy)]
pub struct PairVectors<'a> {
    pub v_q: &'a TopicVector,
    pub v_d: &'a TopicVector,
}

/// The hinge loss of a correct/corrupted pair under the given profile.
pub fn margin_loss(
    profile: &UserProfile,
    pos: PairVectors,
    neg: PairVectors,
    norm_order: NormOrder,
    gamma: f64,
) -> Result<f64> {
    let f_pos = score(profile, pos.v_q, pos.v_d, norm_order)?;
    let f_neg = score(profile, neg.v_q, neg.v_d, norm_order)?;
    Ok(hinge_loss(f_pos, f_neg, gamma))
}

/// Analytic gradients of the active hinge term with respect to the profile
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub v_u: Vec<f64>,
    pub w1: Matrix,
    pub w2: Matrix,
}

/// Gradients of `gamma + f(pos) - f(neg)` (valid where the hinge is
/// active). For the l1 norm these are subgradients with sign(0) = 0.
pub fn loss_gradients(
    profile: &UserProfile,
    pos: PairVectors,
    neg: PairVectors,
    norm_order: NormOrder,
) -> Gradients {
    let k = profile.k();
    let g_pos = norm_order.subgradient(&residual(profile, pos.v_q.values(), pos.v_d.values()));
    let g_neg = norm_order.subgradient(&residual(profile, neg.v_q.values(), neg.v_d.values()));

    let v_u = g_pos
        .iter()
        .zip(&g_neg)
        .map(|(p, n)| p - n)
        .collect::<Vec<f64>>();

    let mut w1 = Matrix {
        k,
        data: vec![0.0; k * k],
    };
    w1.sub_outer(-1.0, &g_pos, pos.v_q.values());
    w1.sub_outer(1.0, &g_neg, neg.v_q.values());

    let mut w2 = Matrix {
        k,
        data: vec![0.0; k * k],
    };
    w2.sub_outer(1.0, &g_pos, pos.v_d.values());
    w2.sub_outer(-1.0, &g_neg, neg.v_d.values());

    Gradients { v_u, w1, w2 }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects the profile back onto the constraint set for the current
/// triple's vectors: `||v_u||_2 <= 1`, `||W1*v_q||_2 <= 1`,
/// `||W2*v_d||_2 <= 1`.
pub fn project_constraints(profile: &mut UserProfile, v_q: &TopicVector, v_d: &TopicVector) {
    let n_u = l2_norm(&profile.v_u);
    if n_u > 1.0 {
        for x in &mut profile.v_u {
            *x /= n_u;
        }
    }
    let n_q = l2_norm(&profile.w1.matvec(v_q.values()));
    if n_q > 1.0 {
        profile.w1.scale(1.0 / n_q);
    }
    let n_d = l2_norm(&profile.w2.matvec(v_d.values()));
    if n_d > 1.0 {
        profile.w2.scale(1.0 / n_d);
    }
}

/// One SGD update on a correct/corrupted pair. Returns the realized loss;
/// the profile is untouched when the hinge is inactive. Matrix gradients
/// are skipped in phase 1 (`update_w = false`).
pub fn sgd_step(
    profile: &mut UserProfile,
    pos: PairVectors,
    neg: PairVectors,
    config: &TrainConfig,
    update_w: bool,
) -> Result<f64> {
    let loss = margin_loss(profile, pos, neg, config.norm_order, config.gamma)?;
    if loss <= 0.0 {
        return Ok(0.0);
    }
    let grads = loss_gradients(profile, pos, neg, config.norm_order);
    for (u, g) in profile.v_u.iter_mut().zip(&grads.v_u) {
        *u -= config.eta * g;
    }
    if update_w {
        let k = profile.k();
        for idx in 0..k * k {
            profile.w1.data[idx] -= config.eta * grads.w1.data[idx];
            profile.w2.data[idx] -= config.eta * grads.w2.data[idx];
        }
    }
    project_constraints(profile, pos.v_q, pos.v_d);
    project_constraints(profile, neg.v_q, neg.v_d);
    Ok(loss)
}

// ---------------------------------------------------------------------------
// Negative sampling

/// Candidate sources for corrupting one correct triple.
#[derive(Debug, Clone)]
pub struct CorruptionPool<'a> {
    /// Non-SAT results of the triple's own entry, in result order.
    pub entry_non_sat: &'a [String],
    /// SAT-clicked docs of the triple's own entry.
    pub entry_positives: &'a HashSet<String>,
    /// The same user's other training queries with their positive doc sets.
    pub other_queries: &'a [(QueryKey, HashSet<String>)],
    /// All embedded corpus docs, sorted; fallback document pool.
    pub corpus_docs: &'a [String],
}

fn corrupt_doc<R: Rng>(pool: &CorruptionPool, rng: &mut R) -> Option<String> {
    if !pool.entry_non_sat.is_empty() {
        let idx = rng.random_range(0..pool.entry_non_sat.len());
        return Some(pool.entry_non_sat[idx].clone());
    }
    if pool.corpus_docs.len() > pool.entry_positives.len() {
        // Rejection sampling; the positives are a sliver of the corpus.
        for _ in 0..64 {
            let idx = rng.random_range(0..pool.corpus_docs.len());
            let doc = &pool.corpus_docs[idx];
            if !pool.entry_positives.contains(doc) {
                return Some(doc.clone());
            }
        }
        let eligible: Vec<&String> = pool
            .corpus_docs
            .iter()
            .filter(|d| !pool.entry_positives.contains(*d))
            .collect();
        if !eligible.is_empty() {
            return Some(eligible[rng.random_range(0..eligible.len())].clone());
        }
    }
    None
}

fn corrupt_query<R: Rng>(triple: &Triple, pool: &CorruptionPool, rng: &mut R) -> Option<QueryKey> {
    let candidates: Vec<&QueryKey> = pool
        .other_queries
        .iter()
        .filter(|(key, positives)| *key != triple.query_key && !positives.contains(&triple.doc_id))
        .map(|(key, _)| key)
        .collect();
    if candidates.is_empty() {
        return None;
    }
    Some(candidates[rng.random_range(0..candidates.len())].clone())
}

/// Corrupts a correct triple: a fair coin picks document or query
/// replacement, falling back to the other side when the chosen pool is
/// empty. The result is never a correct triple.
pub fn corrupt<R: Rng>(triple: &Triple, pool: &CorruptionPool, rng: &mut R) -> Result<Triple> {
    let doc_first = rng.random_bool(0.5);
    let corrupted = if doc_first {
        match corrupt_doc(pool, rng) {
            Some(doc_id) => Some(Triple {
                doc_id,
                ..triple.clone()
            }),
            None => corrupt_query(triple, pool, rng).map(|query_key| Triple {
                query_key,
                ..triple.clone()
            }),
        }
    } else {
        match corrupt_query(triple, pool, rng) {
            Some(query_key) => Some(Triple {
                query_key,
                ..triple.clone()
            }),
            None => corrupt_doc(pool, rng).map(|doc_id| Triple {
                doc_id,
                ..triple.clone()
            }),
        }
    };
    corrupted.ok_or_else(|| Error::EmptyPool(triple.user_id.clone()))
}

// ---------------------------------------------------------------------------
// Training

/// Per-epoch loss sums (over all users) and any users that fell back to the
/// default profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub phase1_epoch_loss: Vec<f64>,
    pub phase2_epoch_loss: Vec<f64>,
    pub defaulted_users: Vec<String>,
}

struct EntryContext {
    key: QueryKey,
    positives: HashSet<String>,
    non_sat: Vec<String>,
}

struct UserTask<'a> {
    user_id: String,
    entries: Vec<EntryContext>,
    /// (entry index, doc id) of each correct triple.
    triples: Vec<(usize, String)>,
    other_queries_by_entry: Vec<Vec<(QueryKey, HashSet<String>)>>,
    store: &'a EmbeddingStore,
    corpus_docs: &'a [String],
    config: &'a TrainConfig,
    ablation_identity_w: bool,
    seed: u64,
}

struct UserOutcome {
    profile: UserProfile,
    phase1_loss: Vec<f64>,
    phase2_loss: Vec<f64>,
}

enum Exec {
    Auto,
    Sequential,
}

/// Trains one profile per user on the train split. Phase 1 learns `v_u`
/// with the matrices frozen at identity; phase 2 fine-tunes everything
/// (skipped entirely when `ablation_identity_w` is set). Users that appear
/// only in validation/test receive the default profile with a warning.
/// Deterministic given the seed: each user trains on its own derived stream,
/// in parallel under the `parallel` feature.
pub fn train_profiles(
    split: &DatasetSplit,
    store: &EmbeddingStore,
    config: &TrainConfig,
    ablation_identity_w: bool,
) -> Result<(BTreeMap<String, UserProfile>, TrainReport)> {
    train_impl(split, store, config, ablation_identity_w, Exec::Auto)
}

/// Sequential reference path for `train_profiles`.
pub fn train_profiles_seq(
    split: &DatasetSplit,
    store: &EmbeddingStore,
    config: &TrainConfig,
    ablation_identity_w: bool,
) -> Result<(BTreeMap<String, UserProfile>, TrainReport)> {
    train_impl(split, store, config, ablation_identity_w, Exec::Sequential)
}

fn train_impl(
    split: &DatasetSplit,
    store: &EmbeddingStore,
    config: &TrainConfig,
    ablation_identity_w: bool,
    exec: Exec,
) -> Result<(BTreeMap<String, UserProfile>, TrainReport)> {
    config.validate()?;

    let mut by_user: BTreeMap<String, Vec<&LabeledEntry>> = BTreeMap::new();
    for le in &split.train {
        by_user.entry(le.entry.user_id.clone()).or_default().push(le);
    }
    // Resolve every training embedding up front so failures name the key.
    for entries in by_user.values() {
        for le in entries {
            let key = le.entry.key();
            if store.query(&key).is_none() {
                return Err(Error::MissingEmbedding(format!("query {key}")));
            }
            for doc in &le.entry.results {
                if store.doc(doc).is_none() {
                    return Err(Error::MissingEmbedding(format!("document {doc}")));
                }
            }
        }
    }

    let corpus_docs: Vec<String> = store.doc_ids().map(str::to_string).collect();

    let tasks: Vec<UserTask> = by_user
        .iter()
        .map(|(user_id, entries)| {
            let contexts: Vec<EntryContext> = entries
                .iter()
                .map(|le| {
                    let positives: HashSet<String> =
                        le.positive_docs().iter().map(|s| s.to_string()).collect();
                    let non_sat = le
                        .entry
                        .results
                        .iter()
                        .filter(|d| !positives.contains(*d))
                        .cloned()
                        .collect();
                    EntryContext {
                        key: le.entry.key(),
                        positives,
                        non_sat,
                    }
                })
                .collect();
            let triples: Vec<(usize, String)> = contexts
                .iter()
                .enumerate()
                .flat_map(|(i, ctx)| {
                    let mut positives: Vec<&String> = ctx.positives.iter().collect();
                    positives.sort();
                    positives
                        .into_iter()
                        .map(move |doc| (i, doc.clone()))
                        .collect::<Vec<_>>()
                })
                .collect();
            let other_queries_by_entry: Vec<Vec<(QueryKey, HashSet<String>)>> = (0..contexts
                .len())
                .map(|i| {
                    contexts
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, ctx)| (ctx.key.clone(), ctx.positives.clone()))
                        .collect()
                })
                .collect();
            UserTask {
                user_id: user_id.clone(),
                entries: contexts,
                triples,
                other_queries_by_entry,
                store,
                corpus_docs: &corpus_docs,
                config,
                ablation_identity_w,
                seed: derive_seed(config.seed, user_id),
            }
        })
        .collect();

    let outcomes: Vec<Result<UserOutcome>> = match exec {
        Exec::Auto => map_batch(&tasks, train_user),
        Exec::Sequential => map_batch_seq(&tasks, train_user),
    };

    let mut profiles = BTreeMap::new();
    let mut report = TrainReport {
        phase1_epoch_loss: vec![0.0; config.epochs_per_phase],
        phase2_epoch_loss: if ablation_identity_w {
            Vec::new()
        } else {
            vec![0.0; config.epochs_per_phase]
        },
        defaulted_users: Vec::new(),
    };
    for outcome in outcomes {
        let outcome = outcome?;
        for (acc, loss) in report.phase1_epoch_loss.iter_mut().zip(&outcome.phase1_loss) {
            *acc += loss;
        }
        for (acc, loss) in report.phase2_epoch_loss.iter_mut().zip(&outcome.phase2_loss) {
            *acc += loss;
        }
        profiles.insert(outcome.profile.user_id.clone(), outcome.profile);
    }

    // Held-out users without training data fall back to the no-op profile.
    let mut heldout_users: Vec<&str> = split
        .test
        .iter()
        .chain(&split.validation)
        .map(|le| le.entry.user_id.as_str())
        .collect();
    heldout_users.sort_unstable();
    heldout_users.dedup();
    for user in heldout_users {
        if !profiles.contains_key(user) {
            log::warn!("user {user} has no training entries; using the default profile");
            profiles.insert(user.to_string(), UserProfile::default_for(user, store.k()));
            report.defaulted_users.push(user.to_string());
        }
    }

    Ok((profiles, report))
}

fn train_user(task: &UserTask) -> Result<UserOutcome> {
    let k = task.store.k();
    let config = task.config;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);

    let mut profile = UserProfile::default_for(&task.user_id, k);
    let bound = 6.0 / (k as f64).sqrt();
    for x in &mut profile.v_u {
        *x = rng.random_range(-bound..bound);
    }
    // Start inside the feasible set.
    let n = l2_norm(&profile.v_u);
    if n > 1.0 {
        for x in &mut profile.v_u {
            *x /= n;
        }
    }

    let mut order: Vec<usize> = (0..task.triples.len()).collect();
    let mut phase1_loss = Vec::with_capacity(config.epochs_per_phase);
    let mut phase2_loss = Vec::new();

    let phases: &[bool] = if task.ablation_identity_w {
        &[false]
    } else {
        &[false, true]
    };
    for &update_w in phases {
        for _ in 0..config.epochs_per_phase {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for &t in &order {
                let (entry_idx, doc_id) = &task.triples[t];
                let ctx = &task.entries[*entry_idx];
                let triple = Triple {
                    query_key: ctx.key.clone(),
                    user_id: task.user_id.clone(),
                    doc_id: doc_id.clone(),
                };
                let pool = CorruptionPool {
                    entry_non_sat: &ctx.non_sat,
                    entry_positives: &ctx.positives,
                    other_queries: &task.other_queries_by_entry[*entry_idx],
                    corpus_docs: task.corpus_docs,
                };
                let pos = resolve(task.store, &triple)?;
                for _ in 0..config.negatives_per_positive {
                    let negative = corrupt(&triple, &pool, &mut rng)?;
                    let neg = resolve(task.store, &negative)?;
                    epoch_loss += sgd_step(&mut profile, pos, neg, config, update_w)?;
                }
            }
            if update_w {
                phase2_loss.push(epoch_loss);
            } else {
                phase1_loss.push(epoch_loss);
            }
        }
    }

    Ok(UserOutcome {
        profile,
        phase1_loss,
        phase2_loss,
    })
}

fn resolve<'a>(store: &'a EmbeddingStore, triple: &Triple) -> Result<PairVectors<'a>> {
    let v_q = store
        .query(&triple.query_key)
        .ok_or_else(|| Error::MissingEmbedding(format!("query {}", triple.query_key)))?;
    let v_d = store
        .doc(&triple.doc_id)
        .ok_or_else(|| Error::MissingEmbedding(format!("document {}", triple.doc_id)))?;
    Ok(PairVectors { v_q, v_d })
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    config: TrainConfig,
    profiles: Vec<UserProfile>,
}

/// Writes all profiles with the config that produced them.
pub fn save_profiles(
    path: impl AsRef<Path>,
    profiles: &BTreeMap<String, UserProfile>,
    config: &TrainConfig,
) -> Result<()> {
    let path = path.as_ref();
    let repr = ProfileFile {
        config: config.clone(),
        profiles: profiles.values().cloned().collect(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(BufWriter::new(file), &repr).map_err(|e| Error::io(path, e.into()))
}

pub fn load_profiles(
    path: impl AsRef<Path>,
) -> Result<(BTreeMap<String, UserProfile>, TrainConfig)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let repr: ProfileFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut profiles = BTreeMap::new();
    for profile in repr.profiles {
        profiles.insert(profile.user_id.clone(), profile);
    }
    Ok((profiles, repr.config))
}
