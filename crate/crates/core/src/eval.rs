//! Ranking metrics (MRR, P@1) and the method-comparison report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logdata::QueryKey;
use crate::rerank::Ranking;

pub const BASELINE_SE: &str = "SE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub mrr: f64,
    pub p_at_1: f64,
    pub n_queries: usize,
}

/// Per-method metrics plus the per-query reciprocal ranks for paired
/// analysis outside this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: BTreeMap<String, MethodMetrics>,
    pub per_query_rr: BTreeMap<String, Vec<(QueryKey, f64)>>,
}

impl EvalReport {
    /// Formatted relative improvements of `method` over the SE baseline, as
    /// `(mrr, p_at_1)` strings, when SE was evaluated.
    pub fn improvement_over_se(&self, method: &str) -> Option<(String, String)> {
        let se = self.methods.get(BASELINE_SE)?;
        let m = self.methods.get(method)?;
        Some((
            format_relative(se.mrr, m.mrr),
            format_relative(se.p_at_1, m.p_at_1),
        ))
    }

    /// Comparison table with improvement subscripts relative to SE.
    pub fn render_table(&self) -> String {
        let mut names: Vec<&String> = self.methods.keys().collect();
        // SE leads, everything else keeps sorted order.
        names.sort_by_key(|n| (n.as_str() != BASELINE_SE, n.as_str()));
        let has_se = self.methods.contains_key(BASELINE_SE);

        let mut out = String::new();
        let _ = write!(out, "Metric");
        for name in &names {
            let _ = write!(out, " | {name}");
        }
        let _ = writeln!(out);

        for (label, pick) in [
            ("MRR", (|m: &MethodMetrics| m.mrr) as fn(&MethodMetrics) -> f64),
            ("P@1", |m: &MethodMetrics| m.p_at_1),
        ] {
            let _ = write!(out, "{label}");
            for name in &names {
                let metrics = &self.methods[*name];
                let value = pick(metrics);
                if has_se && name.as_str() != BASELINE_SE {
                    let base = pick(&self.methods[BASELINE_SE]);
                    let _ = write!(out, " | {:.3} ({})", value, format_relative(base, value));
                } else {
                    let _ = write!(out, " | {value:.3}");
                }
            }
            let _ = writeln!(out);
        }
        let n = self.methods.values().next().map_or(0, |m| m.n_queries);
        let _ = writeln!(out, "n_queries = {n}");
        out
    }
}

/// Relative improvement over a baseline, truncated (not rounded) to one
/// decimal: `0.559 -> 0.656` prints as `+17.3%`.
pub fn format_relative(base: f64, value: f64) -> String {
    if base <= 0.0 {
        return "n/a".to_string();
    }
    let pct = (value - base) / base * 100.0;
    // Truncate the magnitude, with a hair of slack so that values meant to
    // be exact decimals (say -20.0) do not land a representation below the
    // boundary and lose their last step.
    let mut truncated = (pct.abs() * 10.0 + 1e-9).trunc() / 10.0 * pct.signum();
    if truncated == 0.0 {
        truncated = 0.0; // never print -0.0
    }
    format!("{truncated:+.1}%")
}

/// Reciprocal of the 1-based rank of the first relevant document.
pub fn reciprocal_rank(ranking: &Ranking, relevant: &HashSet<String>) -> Result<f64> {
    match ranking.doc_ids.iter().position(|d| relevant.contains(d)) {
        Some(pos) => Ok(1.0 / (pos + 1) as f64),
        None => Err(Error::InvalidInput(format!(
            "no relevant document in ranking for {}; empty positive sets must be filtered upstream",
            ranking.entry_key
        ))),
    }
}

/// Computes MRR and P@1 for every method over the same entry set.
/// Per-query values are aggregated left-to-right over sorted entry keys, so
/// the floating-point sums are reproducible.
pub fn evaluate(
    methods: &BTreeMap<String, Vec<Ranking>>,
    labels: &BTreeMap<QueryKey, HashSet<String>>,
) -> Result<EvalReport> {
    let expected: BTreeSet<&QueryKey> = labels.keys().collect();
    for (name, rankings) in methods {
        let got: BTreeSet<&QueryKey> = rankings.iter().map(|r| &r.entry_key).collect();
        if got != expected {
            return Err(Error::InvalidInput(format!(
                "method {name:?} covers {} entries, labels cover {}; entry sets must match",
                got.len(),
                expected.len()
            )));
        }
        if rankings.len() != expected.len() {
            return Err(Error::InvalidInput(format!(
                "method {name:?} has duplicate entry keys"
            )));
        }
    }

    let mut report = EvalReport {
        methods: BTreeMap::new(),
        per_query_rr: BTreeMap::new(),
    };
    for (name, rankings) in methods {
        let mut by_key: BTreeMap<&QueryKey, &Ranking> =
            rankings.iter().map(|r| (&r.entry_key, r)).collect();
        let mut rr_list = Vec::with_capacity(labels.len());
        let mut rr_sum = 0.0;
        let mut top_hits = 0usize;
        for (key, relevant) in labels {
            let ranking = by_key.remove(key).expect("coverage checked above");
            let rr = reciprocal_rank(ranking, relevant)?;
            rr_sum += rr;
            if relevant.contains(&ranking.doc_ids[0]) {
                top_hits += 1;
            }
            rr_list.push((key.clone(), rr));
        }
        let n = labels.len();
        report.methods.insert(
            name.clone(),
            MethodMetrics {
                mrr: rr_sum / n as f64,
                p_at_1: top_hits as f64 / n as f64,
                n_queries: n,
            },
        );
        report.per_query_rr.insert(name.clone(), rr_list);
    }
    Ok(report)
}
