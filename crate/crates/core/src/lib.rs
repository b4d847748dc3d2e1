//! Embedding-based search personalization.
//!
//! The pipeline: ingest query logs ([`logdata`]), train a topic model on the
//! relevant documents ([`lda`]), embed documents and queries in topic space
//! ([`embeddings`]), learn a per-user profile that scores (query, user,
//! document) triples ([`profile`]), re-rank the engine's top-n list by that
//! score ([`rerank`]), and measure the effect ([`eval`]). [`synth`] generates
//! seeded synthetic logs with planted user interests so the whole pipeline can
//! be exercised and verified at desk scale.
//!
//! Batch operations (corpus embedding, per-user training, re-ranking) run on
//! rayon when the `parallel` feature is enabled (default) and fall back to
//! plain iterators otherwise. Results are identical either way: every
//! per-item computation draws from its own seeded stream.

pub mod embeddings;
pub mod error;
pub mod eval;
pub mod lda;
pub mod logdata;
pub mod par;
pub mod profile;
pub mod rerank;
pub mod synth;

pub use embeddings::{
    build_store, decay_weights, doc_embedding, query_embedding, EmbeddingStore, QueryKey,
};
pub use error::{Error, Result};
pub use eval::{evaluate, reciprocal_rank, EvalReport};
pub use lda::{infer_theta, train_lda, InferParams, LdaParams, TopicModel, TopicVector};
pub use logdata::{
    filter_entries, label_sat, load_log, segment_sessions, split_dataset, Click, DatasetSplit,
    Document, LabeledEntry, LogEntry, Session,
};
pub use profile::{
    corrupt, hinge_loss, project_constraints, score, sgd_step, train_profiles, NormOrder,
    TrainConfig, Triple, UserProfile,
};
pub use rerank::{baseline_ci, baseline_se, rerank_entry, Ranking};
pub use synth::{generate, SynthConfig};
