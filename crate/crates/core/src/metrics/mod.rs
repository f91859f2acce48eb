//! Measurements over interaction logs and trained models.
//!
//! Every function here is a pure function of its inputs, so a report
//! recomputed from exported logs matches the one produced during the run.

mod correlation;
mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use correlation::{spearman, uncertainty_feature_correlations, CorrelationRow, UncertaintySample};
pub use report::{build_report, ArmSeries, CorrelationTable, MetricsConfig, MetricsReport};

use crate::ranker::Ensemble;
use crate::representation::{sigmoid, FeatureRecord};
use crate::sim::{ContentId, CorpusRow, InteractionRecord, RequestTrace, UserId};

/// Discoverable-corpus query: items with more than `threshold` positives in
/// the `window` days after graduating at `graduation` positives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusQuery {
    pub threshold: u64,
    pub window: u32,
    pub graduation: u64,
}

impl CorpusQuery {
    /// Whether the query is shaped as expected; a threshold at or below the
    /// graduation bar usually means the two were swapped.
    pub fn looks_inverted(&self) -> bool {
        self.threshold <= self.graduation
    }
}

/// First day each item's cumulative positives reach `graduation`, by
/// replaying the log in order.
pub fn graduation_days(log: &[InteractionRecord], graduation: u64) -> HashMap<ContentId, u32> {
    let mut positives: HashMap<ContentId, u64> = HashMap::new();
    let mut out = HashMap::new();
    for r in log.iter().filter(|r| r.is_positive()) {
        let p = positives.entry(r.content).or_insert(0);
        *p += 1;
        if *p >= graduation {
            out.entry(r.content).or_insert(r.day);
        }
    }
    out
}

/// Post-graduation positives per item, keyed by day offset after graduation.
fn post_graduation_days(log: &[InteractionRecord], graduation: u64, window: u32) -> HashMap<ContentId, Vec<u32>> {
    let grad = graduation_days(log, graduation);
    let mut out: HashMap<ContentId, Vec<u32>> = HashMap::new();
    for r in log.iter().filter(|r| r.is_positive()) {
        if let Some(&g) = grad.get(&r.content) {
            if r.day > g && r.day - g <= window {
                out.entry(r.content).or_default().push(r.day);
            }
        }
    }
    out
}

/// Items with strictly more than `q.threshold` positives in days
/// `(graduation_day, graduation_day + q.window]`.
pub fn discoverable_corpus(log: &[InteractionRecord], q: &CorpusQuery) -> usize {
    post_graduation_days(log, q.graduation, q.window)
        .values()
        .filter(|days| days.len() as u64 > q.threshold)
        .count()
}

/// Entry `t` is the number of items that became discoverable by the end of
/// day `t`.
pub fn discoverable_series(log: &[InteractionRecord], q: &CorpusQuery, horizon: u32) -> Vec<usize> {
    let mut per_day = vec![0usize; horizon as usize];
    for days in post_graduation_days(log, q.graduation, q.window).values() {
        if days.len() as u64 > q.threshold {
            let mut sorted = days.clone();
            sorted.sort_unstable();
            let reached = sorted[q.threshold as usize] as usize;
            if reached < per_day.len() {
                per_day[reached] += 1;
            }
        }
    }
    per_day
        .iter()
        .scan(0, |acc, &n| {
            *acc += n;
            Some(*acc)
        })
        .collect()
}

/// Items with at least `X` positives in the post-graduation window, for each
/// threshold in ascending order.
pub fn corpus_histogram(
    log: &[InteractionRecord],
    window: u32,
    graduation: u64,
    thresholds: &[u64],
) -> Vec<(u64, usize)> {
    let mut xs = thresholds.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let counts: Vec<u64> = post_graduation_days(log, graduation, window)
        .values()
        .map(|d| d.len() as u64)
        .collect();
    xs.into_iter()
        .map(|x| (x, counts.iter().filter(|&&c| c >= x).count()))
        .collect()
}

/// Cumulative regret after each traced request.
///
/// A request that served `k` items is charged the sum of the `k` best true
/// means among its candidates minus the sum over what it served; with one
/// slot this is the best candidate's mean minus the served one's.
pub fn cumulative_regret(
    log: &[InteractionRecord],
    traces: &[RequestTrace],
    truth: impl Fn(UserId, ContentId) -> f64,
) -> Vec<f64> {
    let mut served: HashMap<u64, Vec<ContentId>> = HashMap::new();
    for r in log {
        served.entry(r.request).or_default().push(r.content);
    }
    let mut total = 0.0;
    traces
        .iter()
        .map(|t| {
            let shown = served.get(&t.request).map(Vec::as_slice).unwrap_or(&[]);
            let mut means: Vec<f64> = t.candidates.iter().map(|&c| truth(t.user, c)).collect();
            means.sort_by(|a, b| b.total_cmp(a));
            let best: f64 = means.iter().take(shown.len()).sum();
            let got: f64 = shown.iter().map(|&c| truth(t.user, c)).sum();
            total += best - got;
            total
        })
        .collect()
}

/// Mean over records of the across-member standard deviation (unbiased) of
/// predicted probabilities. Zero with fewer than two members.
pub fn ensemble_uncertainty(ensemble: &Ensemble, pairs: &[FeatureRecord]) -> crate::Result<f64> {
    if ensemble.len() < 2 || pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for rec in pairs {
        let probs: Vec<f64> = ensemble.logits(rec)?.into_iter().map(sigmoid).collect();
        total += crate::ranker::mean_and_unbiased_variance(&probs).variance.sqrt();
    }
    Ok(total / pairs.len() as f64)
}

/// Users with at least `s` positive records on `day`.
pub fn satisfied_users(log: &[InteractionRecord], day: u32, s: u32) -> usize {
    let mut per_user: HashMap<UserId, u32> = HashMap::new();
    for r in log.iter().filter(|r| r.day == day && r.is_positive()) {
        *per_user.entry(r.user).or_insert(0) += 1;
    }
    per_user.values().filter(|&&n| n >= s).count()
}

/// Satisfied-user counts for days `0..horizon` in one pass.
pub fn satisfied_series(log: &[InteractionRecord], horizon: u32, s: u32) -> Vec<usize> {
    let mut per: BTreeMap<(u32, UserId), u32> = BTreeMap::new();
    for r in log.iter().filter(|r| r.is_positive()) {
        *per.entry((r.day, r.user)).or_insert(0) += 1;
    }
    let mut out = vec![0usize; horizon as usize];
    for (&(day, _), &n) in &per {
        if n >= s {
            if let Some(slot) = out.get_mut(day as usize) {
                *slot += 1;
            }
        }
    }
    out
}

/// Positives grouped by item age at interaction. `edges` split ages in days
/// into `[0, e0), [e0, e1), ..., [e_last, inf)`.
pub fn freshness_buckets(log: &[InteractionRecord], corpus: &[CorpusRow], edges: &[u32]) -> Vec<u64> {
    let mut edges = edges.to_vec();
    edges.sort_unstable();
    let publish: HashMap<ContentId, u32> = corpus.iter().map(|c| (c.id, c.publish_day)).collect();
    let mut out = vec![0u64; edges.len() + 1];
    for r in log.iter().filter(|r| r.is_positive()) {
        let Some(&p) = publish.get(&r.content) else { continue };
        let age = r.day.saturating_sub(p);
        let b = edges.partition_point(|&e| e <= age);
        out[b] += 1;
    }
    out
}
