//! The pipeline config file: one TOML document covering every command, with
//! CLI flags overriding individual fields. The fully resolved config is
//! echoed back so a run can be reproduced from its output directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use topicrank::lda::{InferParams, LdaParams};
use topicrank::profile::NormOrder;
use topicrank::synth::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthSection,
    pub prepare: PrepareSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_users: usize,
    pub n_topics_true: usize,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub n_sessions_per_user: usize,
    pub entries_per_session: usize,
    pub n_results: usize,
    pub user_interest_concentration: f64,
    pub click_noise: f64,
    pub repeat_click_rate: f64,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthConfig::default().into()
    }
}

impl From<SynthConfig> for SynthSection {
    fn from(c: SynthConfig) -> Self {
        SynthSection {
            n_users: c.n_users,
            n_topics_true: c.n_topics_true,
            vocab_size: c.vocab_size,
            n_docs: c.n_docs,
            n_sessions_per_user: c.n_sessions_per_user,
            entries_per_session: c.entries_per_session,
            n_results: c.n_results,
            user_interest_concentration: c.user_interest_concentration,
            click_noise: c.click_noise,
            repeat_click_rate: c.repeat_click_rate,
            seed: c.seed,
        }
    }
}

impl From<&SynthSection> for SynthConfig {
    fn from(s: &SynthSection) -> Self {
        SynthConfig {
            n_users: s.n_users,
            n_topics_true: s.n_topics_true,
            vocab_size: s.vocab_size,
            n_docs: s.n_docs,
            n_sessions_per_user: s.n_sessions_per_user,
            entries_per_session: s.entries_per_session,
            n_results: s.n_results,
            user_interest_concentration: s.user_interest_concentration,
            click_noise: s.click_noise,
            repeat_click_rate: s.repeat_click_rate,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareSection {
    pub session_gap_seconds: f64,
    pub dwell_threshold_seconds: f64,
    pub domain_blocklist: Vec<String>,
    pub split_seed: u64,
}

impl Default for PrepareSection {
    fn default() -> Self {
        PrepareSection {
            session_gap_seconds: 1800.0,
            dwell_threshold_seconds: 30.0,
            domain_blocklist: vec!["facebook".into(), "youtube".into()],
            split_seed: 42,
        }
    }
}

/// Training hyper-parameters; the defaults are the tuned values
/// (k = 200, l1 norm, eta = 0.005, gamma = 5, delta = 0.8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub k: usize,
    /// Document-topic prior; `50 / k` when unset.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub lda_iterations: usize,
    pub infer_iterations: usize,
    pub infer_burn_in: usize,
    pub delta: f64,
    pub norm: String,
    pub eta: f64,
    pub gamma: f64,
    pub epochs_per_phase: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub ablation_identity_w: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            k: 200,
            alpha: None,
            beta: 0.01,
            lda_iterations: 1000,
            infer_iterations: 100,
            infer_burn_in: 50,
            delta: 0.8,
            norm: "l1".into(),
            eta: 0.005,
            gamma: 5.0,
            epochs_per_phase: 200,
            negatives_per_positive: 1,
            seed: 7,
            ablation_identity_w: false,
        }
    }
}

impl TrainSection {
    pub fn lda_params(&self) -> LdaParams {
        LdaParams {
            k: self.k,
            alpha: self.alpha.unwrap_or(50.0 / self.k as f64),
            beta: self.beta,
            iterations: self.lda_iterations,
            seed: self.seed,
        }
    }

    pub fn infer_params(&self) -> InferParams {
        InferParams {
            iterations: self.infer_iterations,
            burn_in: self.infer_burn_in,
        }
    }

    pub fn norm_order(&self) -> Result<NormOrder> {
        self.norm
            .parse()
            .map_err(|e| anyhow::anyhow!("invalid [train] norm: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Methods to compare: any of `se`, `ci`, `ours`, `ours-no-w`.
    pub methods: Vec<String>,
    pub per_query: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            methods: vec!["se".into(), "ci".into(), "ours".into()],
            per_query: false,
        }
    }
}

/// Conventional file names inside a run directory.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunPaths { dir: dir.into() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.join("corpus.jsonl")
    }

    pub fn log(&self) -> PathBuf {
        self.dir.join("log.jsonl")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.dir.join("ground_truth.json")
    }

    pub fn split(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.jsonl"))
    }

    pub fn stats(&self) -> PathBuf {
        self.dir.join("stats.txt")
    }

    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.dir.join("embeddings.json")
    }

    pub fn profiles(&self, ablation: bool) -> PathBuf {
        self.dir.join(if ablation {
            "profiles_ablation.json"
        } else {
            "profiles.json"
        })
    }

    pub fn report_text(&self) -> PathBuf {
        self.dir.join("report.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    pub fn per_query(&self) -> PathBuf {
        self.dir.join("per_query.json")
    }

    pub fn rankings(&self, method: &str) -> PathBuf {
        self.dir.join(format!("rankings_{method}.jsonl"))
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.dir.join("resolved_config.toml")
    }

    pub fn ensure_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))
    }
}
