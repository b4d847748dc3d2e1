//! Query-log data model and ingestion.
//!
//! Log files are UTF-8, one JSON record per line: `user_id`, `timestamp`
//! (integer seconds), `query_text`, `results` (ordered doc ids), `clicks`
//! (`{doc_id, dwell_seconds, position}`). Clicks within an entry are listed
//! in chronological order; that order decides which click is the last of a
//! session. Corpus files are one JSON record per line with `doc_id` and
//! `text`; the loader lowercases, splits on non-alphanumeric characters, and
//! drops short tokens and stopwords.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default inactivity gap demarcating session boundaries, in seconds.
pub const DEFAULT_SESSION_GAP_SECONDS: f64 = 1800.0;
/// Default dwell-time threshold for a satisfied click, in seconds.
pub const DEFAULT_SAT_DWELL_SECONDS: f64 = 30.0;

/// Identifies one log entry: the key under which its query embedding is
/// cached. The same query text issued at different times has a different
/// result list, so the text is not part of the key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryKey {
    pub user_id: String,
    pub timestamp: i64,
}

impl fmt::Display for QueryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.user_id, self.timestamp)
    }
}

/// A tokenized document. `tokens` are ids into the owning corpus vocabulary,
/// in text order, duplicates preserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<usize>,
}

/// One click on a result, with the dwell time spent on the landing page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub doc_id: String,
    pub dwell_seconds: f64,
    /// 1-based rank of the clicked document in the result list.
    pub position: usize,
}

/// One user-query interaction: the engine's top-n results and the clicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub user_id: String,
    pub timestamp: i64,
    pub query_text: String,
    pub results: Vec<String>,
    pub clicks: Vec<Click>,
}

impl LogEntry {
    pub fn key(&self) -> QueryKey {
        QueryKey {
            user_id: self.user_id.clone(),
            timestamp: self.timestamp,
        }
    }

    /// Checks the record-level invariants: non-empty results, no duplicate
    /// doc ids, every click referencing a result with a valid position and
    /// non-negative dwell.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.results.is_empty() {
            return Err("results is empty".to_string());
        }
        let mut seen = HashSet::new();
        for doc in &self.results {
            if !seen.insert(doc.as_str()) {
                return Err(format!("duplicate result doc_id {doc:?}"));
            }
        }
        for click in &self.clicks {
            if !seen.contains(click.doc_id.as_str()) {
                return Err(format!("click doc_id {:?} not in results", click.doc_id));
            }
            if click.dwell_seconds < 0.0 || !click.dwell_seconds.is_finite() {
                return Err(format!(
                    "click on {:?} has invalid dwell {}",
                    click.doc_id, click.dwell_seconds
                ));
            }
            if click.position < 1 || click.position > self.results.len() {
                return Err(format!(
                    "click on {:?} has position {} outside 1..={}",
                    click.doc_id,
                    click.position,
                    self.results.len()
                ));
            }
        }
        Ok(())
    }
}

/// One user's entries with no inactivity gap of `gap_seconds` or more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub user_id: String,
    pub entries: Vec<LogEntry>,
}

/// A log entry with per-result binary relevance labels (SAT = relevant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub entry: LogEntry,
    pub relevance: Vec<bool>,
}

impl LabeledEntry {
    pub fn positive_count(&self) -> usize {
        self.relevance.iter().filter(|r| **r).count()
    }

    /// Doc ids of the positively labeled results, in result order.
    pub fn positive_docs(&self) -> Vec<&str> {
        self.entry
            .results
            .iter()
            .zip(&self.relevance)
            .filter_map(|(doc, rel)| rel.then_some(doc.as_str()))
            .collect()
    }
}

/// A session after labeling and filtering, ready for splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSession {
    pub user_id: String,
    /// Surviving labeled entries, time order.
    pub entries: Vec<LabeledEntry>,
    /// Whether the session's final entry survived filtering. Only then is it
    /// eligible for the test/validation pools.
    pub final_entry_kept: bool,
}

/// Train / validation / test partition of the labeled entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledEntry>,
    pub validation: Vec<LabeledEntry>,
    pub test: Vec<LabeledEntry>,
}

// ---------------------------------------------------------------------------
// Ingestion

/// Loads a line-delimited query log. Returns entries sorted by
/// `(user_id, timestamp)`; any malformed line fails with its line number.
pub fn load_log(path: impl AsRef<Path>) -> Result<Vec<LogEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        entry
            .validate()
            .map_err(|msg| Error::parse(path, line_no, msg))?;
        entries.push(entry);
    }
    entries.sort_by(|a, b| (&a.user_id, a.timestamp).cmp(&(&b.user_id, b.timestamp)));
    Ok(entries)
}

/// Writes entries in the `load_log` line format.
pub fn save_log(path: impl AsRef<Path>, entries: &[LogEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for entry in entries {
        serde_json::to_writer(&mut w, entry).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let labeled: LabeledEntry = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if labeled.relevance.len() != labeled.entry.results.len() {
            return Err(Error::parse(
                path,
                line_no,
                "relevance length differs from results length",
            ));
        }
        entries.push(labeled);
    }
    Ok(entries)
}

pub fn save_labeled(path: impl AsRef<Path>, entries: &[LabeledEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for entry in entries {
        serde_json::to_writer(&mut w, entry).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Corpus loading and tokenization

/// Raw corpus record before tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub text: String,
}

/// Token-id vocabulary, ids assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(id) = self.index.get(token) {
            return *id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Rebuilds the token -> id index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(id, tok)| (tok.clone(), id))
            .collect();
    }
}

/// A tokenized document collection with its vocabulary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub vocab: Vocab,
}

impl Corpus {
    pub fn doc(&self, doc_id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }
}

/// Lowercases, splits on non-alphanumeric characters, and drops tokens
/// shorter than two characters or on the stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().count() >= 2 && !is_stopword(tok))
        .map(str::to_string)
        .collect()
}

/// Tokenizes records into a corpus with a shared vocabulary. Duplicate doc
/// ids are rejected.
pub fn corpus_from_records(records: &[CorpusRecord]) -> Result<Corpus> {
    let mut vocab = Vocab::default();
    let mut docs = Vec::with_capacity(records.len());
    let mut seen = HashSet::new();
    for record in records {
        if !seen.insert(record.doc_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate doc_id {:?} in corpus",
                record.doc_id
            )));
        }
        let tokens = tokenize(&record.text)
            .iter()
            .map(|tok| vocab.intern(tok))
            .collect();
        docs.push(Document {
            doc_id: record.doc_id.clone(),
            tokens,
        });
    }
    Ok(Corpus { docs, vocab })
}

/// Loads and tokenizes a line-delimited corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let records = load_corpus_records(path)?;
    corpus_from_records(&records)
}

pub fn load_corpus_records(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if !seen.insert(record.doc_id.clone()) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate doc_id {:?}", record.doc_id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus_records(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Session segmentation, SAT labeling, filtering, splitting

/// Splits entries into sessions per user. A new session starts whenever the
/// timestamp delta to the previous entry is `gap_seconds` or more (a tie at
/// exactly the gap starts a new session). Input must be sorted by
/// `(user_id, timestamp)`, as `load_log` returns it.
pub fn segment_sessions(entries: &[LogEntry], gap_seconds: f64) -> Result<Vec<Session>> {
    if !(gap_seconds > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gap_seconds must be positive, got {gap_seconds}"
        )));
    }
    for pair in entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (&a.user_id, a.timestamp) > (&b.user_id, b.timestamp) {
            return Err(Error::InvalidInput(format!(
                "entries not sorted by (user_id, timestamp) at {}",
                b.key()
            )));
        }
    }

    let mut sessions: Vec<Session> = Vec::new();
    for entry in entries {
        let open = sessions.last_mut().filter(|s| {
            s.user_id == entry.user_id
                && ((entry.timestamp - s.entries.last().unwrap().timestamp) as f64) < gap_seconds
        });
        match open {
            Some(session) => session.entries.push(entry.clone()),
            None => sessions.push(Session {
                user_id: entry.user_id.clone(),
                entries: vec![entry.clone()],
            }),
        }
    }
    Ok(sessions)
}

/// Labels each result of each entry: positive iff clicked with dwell at
/// least `dwell_threshold`, or it received the chronologically last click of
/// the session (list order within an entry is click order).
pub fn label_sat(session: &Session, dwell_threshold: f64) -> Vec<LabeledEntry> {
    // (entry index, doc id) of the session's final click, if any.
    let last_click = session
        .entries
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, e)| e.clicks.last().map(|c| (i, c.doc_id.clone())));

    session
        .entries
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let relevance = entry
                .results
                .iter()
                .map(|doc| {
                    let sat_dwell = entry
                        .clicks
                        .iter()
                        .any(|c| c.doc_id == *doc && c.dwell_seconds >= dwell_threshold);
                    let is_last = last_click
                        .as_ref()
                        .is_some_and(|(li, ld)| *li == i && ld == doc);
                    sat_dwell || is_last
                })
                .collect();
            LabeledEntry {
                entry: entry.clone(),
                relevance,
            }
        })
        .collect()
}

fn normalize_query(query: &str) -> String {
    query.trim().to_lowercase()
}

/// Drops entries with no positive label and entries whose normalized query
/// text exactly matches a blocklist term (case-insensitive).
pub fn filter_entries(
    labeled: &[LabeledEntry],
    domain_blocklist: &HashSet<String>,
) -> Vec<LabeledEntry> {
    let blocklist: HashSet<String> = domain_blocklist
        .iter()
        .map(|term| normalize_query(term))
        .collect();
    labeled
        .iter()
        .filter(|le| le.positive_count() > 0)
        .filter(|le| !blocklist.contains(&normalize_query(&le.entry.query_text)))
        .cloned()
        .collect()
}

/// Labels and filters each session, recording whether its final entry
/// survived. Sessions left with no entries are dropped.
pub fn filter_sessions(
    sessions: &[Session],
    dwell_threshold: f64,
    domain_blocklist: &HashSet<String>,
) -> Vec<FilteredSession> {
    sessions
        .iter()
        .filter_map(|session| {
            let labeled = label_sat(session, dwell_threshold);
            let final_key = labeled.last().map(|le| le.entry.key());
            let entries = filter_entries(&labeled, domain_blocklist);
            if entries.is_empty() {
                return None;
            }
            let final_entry_kept = final_key
                .is_some_and(|key| entries.iter().any(|le| le.entry.key() == key));
            Some(FilteredSession {
                user_id: session.user_id.clone(),
                entries,
                final_entry_kept,
            })
        })
        .collect()
}

/// Assigns each session's surviving final entry to test or validation with
/// equal probability; everything else goes to train. Sessions whose final
/// entry was filtered out contribute all surviving entries to train.
pub fn split_dataset(sessions: &[FilteredSession], seed: u64) -> DatasetSplit {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit::default();
    for session in sessions {
        let (held_out, rest) = match session.final_entry_kept {
            true => {
                let (last, rest) = session.entries.split_last().expect("non-empty session");
                (Some(last), rest)
            }
            false => (None, session.entries.as_slice()),
        };
        split.train.extend(rest.iter().cloned());
        if let Some(last) = held_out {
            if rng.random_bool(0.5) {
                split.test.push(last.clone());
            } else {
                split.validation.push(last.clone());
            }
        }
    }
    split
}

/// Summary counts in the shape of the dataset-statistics table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub days: i64,
    pub users: usize,
    pub distinct_queries: usize,
    pub sat_clicks: usize,
    pub sessions: usize,
    pub distinct_documents: usize,
}

impl DatasetStats {
    pub fn compute(sessions: &[FilteredSession]) -> Self {
        let mut users = HashSet::new();
        let mut queries = HashSet::new();
        let mut documents = HashSet::new();
        let mut sat_clicks = 0;
        let mut min_ts = i64::MAX;
        let mut max_ts = i64::MIN;
        for session in sessions {
            users.insert(session.user_id.as_str());
            for le in &session.entries {
                queries.insert(normalize_query(&le.entry.query_text));
                sat_clicks += le.positive_count();
                for doc in &le.entry.results {
                    documents.insert(doc.as_str());
                }
                min_ts = min_ts.min(le.entry.timestamp);
                max_ts = max_ts.max(le.entry.timestamp);
            }
        }
        let days = if min_ts > max_ts {
            0
        } else {
            (max_ts - min_ts) / 86_400 + 1
        };
        DatasetStats {
            days,
            users: users.len(),
            distinct_queries: queries.len(),
            sat_clicks,
            sessions: sessions.len(),
            distinct_documents: documents.len(),
        }
    }

    pub fn render_table(&self) -> String {
        format!(
            "#days | #users | #distinct queries | #SAT clicks | #sessions | #distinct documents\n\
             {} | {} | {} | {} | {} | {}\n",
            self.days,
            self.users,
            self.distinct_queries,
            self.sat_clicks,
            self.sessions,
            self.distinct_documents
        )
    }
}

/// True if `token` is on the bundled stopword list.
pub fn is_stopword(token: &str) -> bool {
    STOPWORD_LIST.binary_search(&token).is_ok()
}

// Sorted; looked up by binary search. Single-letter words are omitted since
// the length filter drops them first.
const STOPWORD_LIST: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "if", "in", "into", "is", "it", "its",
    "itself", "me", "more", "most", "my", "myself", "no", "nor", "not", "of", "off", "on",
    "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out", "over", "own",
    "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "with", "would", "you", "your", "yours",
    "yourself", "yourselves",
];
