//! Topic model training and inference by collapsed Gibbs sampling.
//!
//! Training resamples every token's topic assignment from the full
//! conditional `(n_dz + alpha) * (n_zw + beta) / (n_z + V*beta)`, keeping all
//! count matrices collapsed. Each document draws from its own seeded stream
//! per sweep, so results are reproducible and do not depend on hash or batch
//! order. Inference for an unseen document holds the topic-word counts fixed
//! and resamples only the document's local assignments, averaging the
//! smoothed topic proportions over post-burn-in sweeps.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logdata::{Corpus, Document, Vocab};
use crate::par::{derive_seed, derive_seed_indexed};

/// A probability distribution over the model's topics; the embedding type
/// for both documents and queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicVector(Vec<f64>);

impl TopicVector {
    pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

    /// Validates non-negativity and unit sum (within `SIMPLEX_TOLERANCE`).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty topic vector".into()));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "topic vector has negative or non-finite entries".into(),
            ));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SIMPLEX_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "topic vector sums to {sum}, expected 1"
            )));
        }
        Ok(TopicVector(values))
    }

    /// The uniform distribution `1/k`; fallback for fully out-of-vocabulary
    /// documents.
    pub fn uniform(k: usize) -> Self {
        TopicVector(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest component.
    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Training parameters. `alpha = 50/k` and `beta = 0.01` follow the usual
/// toolkit defaults for collapsed Gibbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn with_k(k: usize) -> Self {
        LdaParams {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
        }
    }
}

/// Inference parameters: total sweeps and how many to discard before
/// averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferParams {
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for InferParams {
    fn default() -> Self {
        InferParams {
            iterations: 100,
            burn_in: 50,
        }
    }
}

/// Trained LDA state: the collapsed topic-word counts plus priors, enough to
/// infer topic proportions for unseen documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    k: usize,
    alpha: f64,
    beta: f64,
    vocab: Vocab,
    /// k x V, row-major.
    topic_word_counts: Vec<u64>,
    topic_totals: Vec<u64>,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn topic_word_count(&self, topic: usize, word: usize) -> u64 {
        self.topic_word_counts[topic * self.vocab.len() + word]
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    /// Total assigned token count, equal to the training corpus size.
    pub fn total_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// Tokenizes raw text against the model vocabulary, dropping unknown
    /// tokens.
    pub fn doc_from_text(&self, doc_id: &str, text: &str) -> Document {
        let tokens = crate::logdata::tokenize(text)
            .iter()
            .filter_map(|tok| self.vocab.id(tok))
            .collect();
        Document {
            doc_id: doc_id.to_string(),
            tokens,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::io(path, e.into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut model: TopicModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        model.vocab.rebuild_index();
        Ok(model)
    }
}

/// Trains a topic model with `params.iterations` full collapsed Gibbs
/// sweeps. Deterministic given the seed: every document draws from its own
/// stream derived from `(seed, doc_id, sweep)`.
pub fn train_lda(corpus: &Corpus, params: &LdaParams) -> Result<TopicModel> {
    if params.k < 2 {
        return Err(Error::InvalidInput(format!(
            "k must be at least 2, got {}",
            params.k
        )));
    }
    if corpus.docs.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if let Some(doc) = corpus.docs.iter().find(|d| d.tokens.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "document {:?} has no tokens",
            doc.doc_id
        )));
    }
    if params.iterations < 1 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    if !(params.alpha > 0.0) || !(params.beta > 0.0) {
        return Err(Error::InvalidInput("alpha and beta must be positive".into()));
    }
    let vocab_size = corpus.vocab.len();
    if let Some((doc, tok)) = corpus
        .docs
        .iter()
        .find_map(|d| d.tokens.iter().find(|t| **t >= vocab_size).map(|t| (d, *t)))
    {
        return Err(Error::InvalidInput(format!(
            "document {:?} references token id {tok} outside vocabulary of size {vocab_size}",
            doc.doc_id
        )));
    }

    let k = params.k;
    let mut topic_word_counts = vec![0u64; k * vocab_size];
    let mut topic_totals = vec![0u64; k];
    let mut doc_topic: Vec<Vec<u64>> = corpus.docs.iter().map(|_| vec![0u64; k]).collect();
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(corpus.docs.len());

    let doc_seeds: Vec<u64> = corpus
        .docs
        .iter()
        .map(|d| derive_seed(params.seed, &d.doc_id))
        .collect();

    // Sweep 0: uniform random initial assignments.
    for (d, doc) in corpus.docs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(doc_seeds[d], 0));
        let z: Vec<usize> = doc
            .tokens
            .iter()
            .map(|_| rng.random_range(0..k))
            .collect();
        for (tok, topic) in doc.tokens.iter().zip(&z) {
            doc_topic[d][*topic] += 1;
            topic_word_counts[*topic * vocab_size + *tok] += 1;
            topic_totals[*topic] += 1;
        }
        assignments.push(z);
    }

    let v_beta = vocab_size as f64 * params.beta;
    let mut weights = vec![0.0f64; k];
    for sweep in 1..=params.iterations {
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed_indexed(doc_seeds[d], sweep as u64));
            for (j, &word) in doc.tokens.iter().enumerate() {
                let old = assignments[d][j];
                doc_topic[d][old] -= 1;
                topic_word_counts[old * vocab_size + word] -= 1;
                topic_totals[old] -= 1;

                let mut total = 0.0;
                for (t, w) in weights.iter_mut().enumerate() {
                    *w = (doc_topic[d][t] as f64 + params.alpha)
                        * (topic_word_counts[t * vocab_size + word] as f64 + params.beta)
                        / (topic_totals[t] as f64 + v_beta);
                    total += *w;
                }
                let new = sample_categorical(&weights, total, &mut rng);

                assignments[d][j] = new;
                doc_topic[d][new] += 1;
                topic_word_counts[new * vocab_size + word] += 1;
                topic_totals[new] += 1;
            }
        }
    }

    Ok(TopicModel {
        k,
        alpha: params.alpha,
        beta: params.beta,
        vocab: corpus.vocab.clone(),
        topic_word_counts,
        topic_totals,
    })
}

/// Estimates the topic proportions of one document under a frozen model.
/// Out-of-vocabulary tokens are dropped; a document with none left is an
/// error so the caller can decide on a fallback.
pub fn infer_theta(
    model: &TopicModel,
    doc: &Document,
    params: &InferParams,
    seed: u64,
) -> Result<TopicVector> {
    if params.iterations <= params.burn_in {
        return Err(Error::InvalidInput(format!(
            "iterations ({}) must exceed burn_in ({})",
            params.iterations, params.burn_in
        )));
    }
    let vocab_size = model.vocab.len();
    let tokens: Vec<usize> = doc
        .tokens
        .iter()
        .copied()
        .filter(|t| *t < vocab_size)
        .collect();
    if tokens.is_empty() {
        return Err(Error::AllOutOfVocabulary(doc.doc_id.clone()));
    }

    let k = model.k;
    let v_beta = vocab_size as f64 * model.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut local_counts = vec![0u64; k];
    let mut assignments: Vec<usize> = tokens
        .iter()
        .map(|_| rng.random_range(0..k))
        .collect();
    for topic in &assignments {
        local_counts[*topic] += 1;
    }

    let len = tokens.len() as f64;
    let denom = len + k as f64 * model.alpha;
    let mut theta_acc = vec![0.0f64; k];
    let mut weights = vec![0.0f64; k];
    for sweep in 1..=params.iterations {
        for (j, &word) in tokens.iter().enumerate() {
            let old = assignments[j];
            local_counts[old] -= 1;

            let mut total = 0.0;
            for (t, w) in weights.iter_mut().enumerate() {
                *w = (local_counts[t] as f64 + model.alpha)
                    * (model.topic_word_counts[t * vocab_size + word] as f64 + model.beta)
                    / (model.topic_totals[t] as f64 + v_beta);
                total += *w;
            }
            let new = sample_categorical(&weights, total, &mut rng);
            assignments[j] = new;
            local_counts[new] += 1;
        }
        if sweep > params.burn_in {
            for (t, acc) in theta_acc.iter_mut().enumerate() {
                *acc += (local_counts[t] as f64 + model.alpha) / denom;
            }
        }
    }

    let samples = (params.iterations - params.burn_in) as f64;
    for acc in &mut theta_acc {
        *acc /= samples;
    }
    TopicVector::new(theta_acc)
}

fn sample_categorical(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
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

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::logdata::{corpus_from_records, CorpusRecord};

    /// Corpus over two disjoint vocabularies; documents alternate between
    /// them, so with k = 2 each group should collapse onto its own topic.
    pub(crate) fn disjoint_corpus(docs_per_group: usize, tokens_per_doc: usize) -> Corpus {
        let mut records = Vec::new();
        for i in 0..docs_per_group * 2 {
            let group = i % 2;
            let mut words = Vec::new();
            for j in 0..tokens_per_doc {
                let w = (i * 7 + j * 3) % 20;
                words.push(match group {
                    0 => format!("fruit{w:02}"),
                    _ => format!("stone{w:02}"),
                });
            }
            records.push(CorpusRecord {
                doc_id: format!("d{i:03}"),
                text: words.join(" "),
            });
        }
        corpus_from_records(&records).unwrap()
    }

    fn quick_params(k: usize, iterations: usize, seed: u64) -> LdaParams {
        LdaParams {
            iterations,
            seed,
            ..LdaParams::with_k(k)
        }
    }

    #[test]
    fn disjoint_vocabularies_separate_into_topics() {
        let corpus = disjoint_corpus(20, 30);
        // Small alpha: the smoothed estimate (n + alpha)/(len + k*alpha)
        // needs the prior mass well under the document length to reach 0.9.
        let params = LdaParams {
            alpha: 0.1,
            ..quick_params(2, 200, 11)
        };
        let model = train_lda(&corpus, &params).unwrap();
        let infer = InferParams::default();

        let mut group_topic = [None, None];
        for (i, doc) in corpus.docs.iter().enumerate() {
            let theta = infer_theta(&model, doc, &infer, derive_seed(99, &doc.doc_id)).unwrap();
            let top = theta.argmax();
            assert!(
                theta.values()[top] >= 0.9,
                "doc {} mass {:?}",
                doc.doc_id,
                theta.values()
            );
            let group = i % 2;
            match group_topic[group] {
                None => group_topic[group] = Some(top),
                Some(t) => assert_eq!(t, top, "group {group} split between topics"),
            }
        }
        assert_ne!(group_topic[0], group_topic[1]);
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let corpus = disjoint_corpus(5, 20);
        let params = quick_params(2, 50, 3);
        let a = train_lda(&corpus, &params).unwrap();
        let b = train_lda(&corpus, &params).unwrap();
        assert_eq!(a.topic_word_counts, b.topic_word_counts);
        assert_eq!(a.topic_totals, b.topic_totals);
    }

    #[test]
    fn empty_document_rejected() {
        let mut corpus = disjoint_corpus(2, 10);
        corpus.docs[1].tokens.clear();
        assert!(matches!(
            train_lda(&corpus, &quick_params(2, 10, 0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn small_k_and_empty_corpus_rejected() {
        let corpus = disjoint_corpus(2, 10);
        assert!(train_lda(&corpus, &quick_params(1, 10, 0)).is_err());
        let empty = Corpus::default();
        assert!(train_lda(&empty, &quick_params(2, 10, 0)).is_err());
    }

    #[test]
    fn count_conservation_after_sweeps() {
        let corpus = disjoint_corpus(6, 25);
        let total_tokens: u64 = corpus.docs.iter().map(|d| d.tokens.len() as u64).sum();
        let model = train_lda(&corpus, &quick_params(3, 30, 5)).unwrap();
        assert_eq!(model.total_tokens(), total_tokens);
        // Row sums match the totals.
        let v = model.vocab().len();
        for t in 0..model.k() {
            let row: u64 = (0..v).map(|w| model.topic_word_count(t, w)).sum();
            assert_eq!(row, model.topic_totals()[t]);
        }
    }

    #[test]
    fn inference_output_is_on_simplex() {
        let corpus = disjoint_corpus(5, 20);
        let model = train_lda(&corpus, &quick_params(2, 50, 3)).unwrap();
        let theta = infer_theta(&model, &corpus.docs[0], &InferParams::default(), 1).unwrap();
        let sum: f64 = theta.values().iter().sum();
        assert!((sum - 1.0).abs() <= TopicVector::SIMPLEX_TOLERANCE);
        assert!(theta.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn fully_oov_document_is_an_error() {
        let corpus = disjoint_corpus(5, 20);
        let model = train_lda(&corpus, &quick_params(2, 50, 3)).unwrap();
        let oov = Document {
            doc_id: "ghost".into(),
            tokens: vec![corpus.vocab.len() + 5],
        };
        assert!(matches!(
            infer_theta(&model, &oov, &InferParams::default(), 1),
            Err(Error::AllOutOfVocabulary(_))
        ));
    }

    #[test]
    fn infer_rejects_bad_iteration_budget() {
        let corpus = disjoint_corpus(5, 20);
        let model = train_lda(&corpus, &quick_params(2, 20, 3)).unwrap();
        let params = InferParams {
            iterations: 10,
            burn_in: 10,
        };
        assert!(infer_theta(&model, &corpus.docs[0], &params, 1).is_err());
    }

    // Swapping document order leaves each document's final theta within
    // sampling noise, since every document draws from its own stream.
    #[test]
    fn document_order_smoke_test() {
        let corpus = disjoint_corpus(1, 40);
        let mut swapped = corpus.clone();
        swapped.docs.swap(0, 1);

        let params = quick_params(2, 150, 17);
        let a = train_lda(&corpus, &params).unwrap();
        let b = train_lda(&swapped, &params).unwrap();
        let infer = InferParams::default();
        for doc in &corpus.docs {
            let ta = infer_theta(&a, doc, &infer, derive_seed(5, &doc.doc_id)).unwrap();
            let tb = infer_theta(&b, doc, &infer, derive_seed(5, &doc.doc_id)).unwrap();
            for (x, y) in ta.values().iter().zip(tb.values()) {
                assert!((x - y).abs() < 0.05, "theta drifted: {x} vs {y}");
            }
        }
    }

    #[test]
    fn model_roundtrips_through_file() {
        let corpus = disjoint_corpus(3, 15);
        let model = train_lda(&corpus, &quick_params(2, 20, 9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = TopicModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        // The rebuilt index answers lookups.
        assert_eq!(loaded.vocab().id("fruit00"), corpus.vocab.id("fruit00"));
    }
}
