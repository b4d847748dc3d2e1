//! Document and query embeddings in topic space.
//!
//! A document's embedding is its inferred topic proportion vector; a
//! query's embedding is the decay-weighted mixture of its top-n returned
//! documents' vectors, with geometrically decaying weights so higher-ranked
//! documents contribute more. Queries are keyed by `(user_id, timestamp)`:
//! the same text issued at another time has a different result list and
//! hence a different embedding.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use crate::logdata::QueryKey;

use crate::error::{Error, Result};
use crate::lda::{infer_theta, InferParams, TopicModel, TopicVector};
use crate::logdata::{Corpus, Document, LogEntry};
use crate::par::{derive_seed, map_batch, map_batch_seq};

/// Read-only collection of document and query embeddings, all of dimension
/// `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    k: usize,
    docs: BTreeMap<String, TopicVector>,
    queries: BTreeMap<QueryKey, TopicVector>,
}

impl EmbeddingStore {
    pub fn new(k: usize) -> Self {
        EmbeddingStore {
            k,
            docs: BTreeMap::new(),
            queries: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn insert_doc(&mut self, doc_id: impl Into<String>, vector: TopicVector) -> Result<()> {
        self.check_dim(&vector)?;
        self.docs.insert(doc_id.into(), vector);
        Ok(())
    }

    pub fn insert_query(&mut self, key: QueryKey, vector: TopicVector) -> Result<()> {
        self.check_dim(&vector)?;
        self.queries.insert(key, vector);
        Ok(())
    }

    fn check_dim(&self, vector: &TopicVector) -> Result<()> {
        if vector.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: vector.len(),
            });
        }
        Ok(())
    }

    pub fn doc(&self, doc_id: &str) -> Option<&TopicVector> {
        self.docs.get(doc_id)
    }

    pub fn query(&self, key: &QueryKey) -> Option<&TopicVector> {
        self.queries.get(key)
    }

    /// Doc ids in sorted order.
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn doc_vectors(&self) -> impl Iterator<Item = (&str, &TopicVector)> {
        self.docs.iter().map(|(id, v)| (id.as_str(), v))
    }

    pub fn query_vectors(&self) -> impl Iterator<Item = (&QueryKey, &TopicVector)> {
        self.queries.iter()
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let repr = StoreFile {
            k: self.k,
            docs: self
                .docs
                .iter()
                .map(|(id, v)| (id.clone(), v.clone()))
                .collect(),
            queries: self
                .queries
                .iter()
                .map(|(key, v)| (key.clone(), v.clone()))
                .collect(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), &repr).map_err(|e| Error::io(path, e.into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let repr: StoreFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let mut store = EmbeddingStore::new(repr.k);
        for (id, v) in repr.docs {
            store.insert_doc(id, v)?;
        }
        for (key, v) in repr.queries {
            store.insert_query(key, v)?;
        }
        Ok(store)
    }
}

/// On-disk shape: dimension header plus explicit record lists.
#[derive(Serialize, Deserialize)]
struct StoreFile {
    k: usize,
    docs: Vec<(String, TopicVector)>,
    queries: Vec<(QueryKey, TopicVector)>,
}

/// Embeds one document: its inferred topic proportions, or the uniform
/// vector when every token is out of vocabulary.
pub fn doc_embedding(
    model: &TopicModel,
    doc: &Document,
    params: &InferParams,
    seed: u64,
) -> Result<TopicVector> {
    match infer_theta(model, doc, params, seed) {
        Ok(theta) => Ok(theta),
        Err(Error::AllOutOfVocabulary(_)) => Ok(TopicVector::uniform(model.k())),
        Err(e) => Err(e),
    }
}

/// Normalized geometric decay weights over ranks `1..=n`: strictly
/// decreasing, summing to one.
pub fn decay_weights(n: usize, delta: f64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidInput("decay weights need n >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let mut weights = Vec::with_capacity(n);
    let mut w = 1.0;
    let mut sum = 0.0;
    for _ in 0..n {
        weights.push(w);
        sum += w;
        w *= delta;
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Mixes the ranked documents' topic vectors with decay weights: the query's
/// probability of topic `z` is the weighted sum of the documents'.
pub fn query_embedding(ranked_docs: &[&TopicVector], delta: f64) -> Result<TopicVector> {
    let first = ranked_docs
        .first()
        .ok_or_else(|| Error::InvalidInput("query embedding needs at least one document".into()))?;
    let k = first.len();
    for v in ranked_docs {
        if v.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: v.len(),
            });
        }
    }
    let weights = decay_weights(ranked_docs.len(), delta)?;
    let mut out = vec![0.0f64; k];
    for (vector, weight) in ranked_docs.iter().zip(&weights) {
        for (o, v) in out.iter_mut().zip(vector.values()) {
            *o += weight * v;
        }
    }
    TopicVector::new(out)
}

/// Parameters for building a full store: inference budget, decay, and the
/// base seed for per-document streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreBuildParams {
    pub infer: InferParams,
    pub delta: f64,
    pub seed: u64,
}

/// Embeds every corpus document and every entry's query. Document inference
/// runs in parallel under the `parallel` feature; each document draws from a
/// stream derived from its id, so the result does not depend on scheduling.
pub fn build_store(
    model: &TopicModel,
    corpus: &Corpus,
    entries: &[LogEntry],
    params: &StoreBuildParams,
) -> Result<EmbeddingStore> {
    let embedded = map_batch(&corpus.docs, |doc| {
        doc_embedding(model, doc, &params.infer, derive_seed(params.seed, &doc.doc_id))
            .map(|v| (doc.doc_id.clone(), v))
    });
    assemble_store(model.k(), embedded, entries, params.delta)
}

/// Sequential reference path for `build_store`.
pub fn build_store_seq(
    model: &TopicModel,
    corpus: &Corpus,
    entries: &[LogEntry],
    params: &StoreBuildParams,
) -> Result<EmbeddingStore> {
    let embedded = map_batch_seq(&corpus.docs, |doc| {
        doc_embedding(model, doc, &params.infer, derive_seed(params.seed, &doc.doc_id))
            .map(|v| (doc.doc_id.clone(), v))
    });
    assemble_store(model.k(), embedded, entries, params.delta)
}

/// Rebuilds a store with the same document vectors but query embeddings
/// recomputed at a different decay. Used by the hyper-parameter grid so the
/// document inference is not repeated per delta.
pub fn with_queries(
    store: &EmbeddingStore,
    entries: &[LogEntry],
    delta: f64,
) -> Result<EmbeddingStore> {
    let mut out = EmbeddingStore::new(store.k);
    out.docs = store.docs.clone();
    fill_queries(&mut out, entries, delta)?;
    Ok(out)
}

fn assemble_store(
    k: usize,
    embedded: Vec<Result<(String, TopicVector)>>,
    entries: &[LogEntry],
    delta: f64,
) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new(k);
    for item in embedded {
        let (doc_id, vector) = item?;
        store.insert_doc(doc_id, vector)?;
    }
    fill_queries(&mut store, entries, delta)?;
    Ok(store)
}

fn fill_queries(store: &mut EmbeddingStore, entries: &[LogEntry], delta: f64) -> Result<()> {
    let query_vectors: Vec<Result<(QueryKey, TopicVector)>> = map_batch(entries, |entry| {
        let ranked: Vec<&TopicVector> = entry
            .results
            .iter()
            .map(|doc_id| {
                store
                    .doc(doc_id)
                    .ok_or_else(|| Error::MissingEmbedding(format!("document {doc_id}")))
            })
            .collect::<Result<_>>()?;
        Ok((entry.key(), query_embedding(&ranked, delta)?))
    });
    for item in query_vectors {
        let (key, vector) = item?;
        store.insert_query(key, vector)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tv(values: &[f64]) -> TopicVector {
        TopicVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn single_rank_weight_is_one() {
        assert_eq!(decay_weights(1, 0.3).unwrap(), vec![1.0]);
    }

    #[test]
    fn three_ranks_at_half_decay() {
        let w = decay_weights(3, 0.5).unwrap();
        let expected = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn ten_ranks_at_tuned_decay() {
        let w = decay_weights(10, 0.8).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((w[0] / w[1] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn decay_rejects_bad_arguments() {
        assert!(decay_weights(0, 0.5).is_err());
        assert!(decay_weights(3, 0.0).is_err());
        assert!(decay_weights(3, 1.0).is_err());
        assert!(decay_weights(3, 1.5).is_err());
    }

    #[test]
    fn identical_documents_are_a_fixed_point() {
        let v = tv(&[0.2, 0.5, 0.3]);
        let out = query_embedding(&[&v, &v, &v], 0.8).unwrap();
        for (a, b) in out.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_document_mixture_by_hand() {
        let a = tv(&[1.0, 0.0]);
        let b = tv(&[0.0, 1.0]);
        let out = query_embedding(&[&a, &b], 0.5).unwrap();
        assert!((out.values()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.values()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_list_rejected() {
        assert!(query_embedding(&[], 0.5).is_err());
    }

    #[test]
    fn rank_swap_moves_output_toward_promoted_vector() {
        let a = tv(&[0.9, 0.1]);
        let b = tv(&[0.1, 0.9]);
        let filler = tv(&[0.5, 0.5]);
        let base = query_embedding(&[&a, &filler, &b], 0.8).unwrap();
        let swapped = query_embedding(&[&b, &filler, &a], 0.8).unwrap();
        // Moving b up must shift the output along (b - a).
        let shift: f64 = swapped
            .values()
            .iter()
            .zip(base.values())
            .zip(b.values().iter().zip(a.values()))
            .map(|((s, o), (vb, va))| (s - o) * (vb - va))
            .sum();
        assert!(shift > 0.0);
    }

    #[test]
    fn fully_oov_document_falls_back_to_uniform() {
        let corpus = crate::lda::tests::disjoint_corpus(3, 15);
        let params = crate::lda::LdaParams {
            iterations: 20,
            seed: 2,
            ..crate::lda::LdaParams::with_k(4)
        };
        let model = crate::lda::train_lda(&corpus, &params).unwrap();
        let oov = Document {
            doc_id: "ghost".into(),
            tokens: vec![],
        };
        let v = doc_embedding(&model, &oov, &InferParams::default(), 1).unwrap();
        assert_eq!(v.values(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn store_roundtrip_is_lossless() {
        let mut store = EmbeddingStore::new(3);
        store
            .insert_doc("d1", tv(&[0.1234567890123, 0.3, 0.5765432109877]))
            .unwrap();
        store
            .insert_query(
                QueryKey {
                    user_id: "u1".into(),
                    timestamp: 17,
                },
                tv(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            )
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        store.save(&path).unwrap();
        let loaded = EmbeddingStore::load(&path).unwrap();
        assert_eq!(store, loaded);
    }

    #[test]
    fn store_rejects_mismatched_dimension() {
        let mut store = EmbeddingStore::new(3);
        assert!(matches!(
            store.insert_doc("d1", tv(&[0.5, 0.5])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    fn simplex(k: usize) -> impl Strategy<Value = TopicVector> {
        proptest::collection::vec(1e-3f64..1.0, k).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            TopicVector::new(raw.into_iter().map(|v| v / sum).collect()).unwrap()
        })
    }

    proptest! {
        // The closed-form weights equal brute-force normalization of the
        // geometric sequence.
        #[test]
        fn decay_matches_bruteforce(n in 1usize..12, delta in 0.01f64..0.99) {
            let w = decay_weights(n, delta).unwrap();
            let raw: Vec<f64> = (0..n).map(|i| delta.powi(i as i32)).collect();
            let sum: f64 = raw.iter().sum();
            for (a, b) in w.iter().zip(&raw) {
                prop_assert!((a - b / sum).abs() < 1e-12);
            }
            for pair in w.windows(2) {
                prop_assert!(pair[0] > pair[1]);
            }
        }

        // Output stays inside the componentwise envelope of its inputs.
        #[test]
        fn mixture_stays_in_convex_hull(
            docs in proptest::collection::vec(simplex(4), 1..8),
            delta in 0.05f64..0.95,
        ) {
            let refs: Vec<&TopicVector> = docs.iter().collect();
            let out = query_embedding(&refs, delta).unwrap();
            let sum: f64 = out.values().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            for z in 0..4 {
                let lo = docs.iter().map(|d| d.values()[z]).fold(f64::INFINITY, f64::min);
                let hi = docs.iter().map(|d| d.values()[z]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.values()[z] >= lo - 1e-12);
                prop_assert!(out.values()[z] <= hi + 1e-12);
            }
        }
    }
}
