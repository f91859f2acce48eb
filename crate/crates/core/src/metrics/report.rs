use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    corpus_histogram, cumulative_regret, discoverable_series, freshness_buckets, satisfied_series, CorpusQuery,
    CorrelationRow,
};
use crate::sim::{ArmId, ContentId, CorpusRow, InteractionRecord, RequestTrace, UserId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Discoverable-corpus thresholds `X`.
    pub thresholds: Vec<u64>,
    /// Post-graduation window `Y` in days.
    pub window: u32,
    /// Thresholds for the "at least X" histogram.
    pub histogram: Vec<u64>,
    /// Daily positives that make a user count as satisfied.
    pub satisfied_threshold: u32,
    /// Freshness bucket edges in days.
    pub freshness_edges: Vec<u32>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![10, 50],
            window: 7,
            histogram: vec![1, 5, 10, 25, 50, 100],
            satisfied_threshold: 1,
            freshness_edges: vec![1, 3, 12],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSeries {
    pub arm: ArmId,
    /// `(X, cumulative discoverable count per day)`.
    pub discoverable: Vec<(u64, Vec<usize>)>,
    pub satisfied: Vec<usize>,
    pub impressions: Vec<usize>,
    pub positives: Vec<usize>,
    /// Cumulative regret at the end of each day; empty without traces.
    pub cumulative_regret: Vec<f64>,
}

impl ArmSeries {
    /// Discoverable count at the horizon for threshold `x`.
    pub fn discoverable_at_end(&self, x: u64) -> Option<usize> {
        self.discoverable
            .iter()
            .find(|(t, _)| *t == x)
            .and_then(|(_, s)| s.last().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub arm: ArmId,
    pub label: String,
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("Spearman correlation of {} uncertainty, arm {}\n", self.label, self.arm);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "  {:<14} {:>8} (se {})",
                r.feature,
                r.estimate.map_or_else(|| "NA".into(), |v| format!("{v:.4}")),
                r.std_error.map_or_else(|| "NA".into(), |v| format!("{v:.4}"))
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon: u32,
    pub window: u32,
    pub arms: Vec<ArmSeries>,
    pub histogram: Vec<(ArmId, u64, usize)>,
    pub freshness_edges: Vec<u32>,
    pub freshness: Vec<(ArmId, Vec<u64>)>,
    pub correlations: Vec<CorrelationTable>,
}

/// Per-arm metrics over a log. Each arm is measured on its own records,
/// graduation included.
pub fn build_report(
    log: &[InteractionRecord],
    corpus: &[CorpusRow],
    traces: &[RequestTrace],
    truth: Option<&dyn Fn(UserId, ContentId) -> f64>,
    graduation: u64,
    horizon: u32,
    cfg: &MetricsConfig,
) -> MetricsReport {
    let arms: BTreeSet<ArmId> = log.iter().map(|r| r.arm).chain(traces.iter().map(|t| t.arm)).collect();
    let mut report = MetricsReport {
        horizon,
        window: cfg.window,
        arms: Vec::new(),
        histogram: Vec::new(),
        freshness_edges: cfg.freshness_edges.clone(),
        freshness: Vec::new(),
        correlations: Vec::new(),
    };
    for arm in arms {
        let arm_log: Vec<InteractionRecord> = log.iter().filter(|r| r.arm == arm).cloned().collect();
        let discoverable = cfg
            .thresholds
            .iter()
            .map(|&x| {
                let q = CorpusQuery {
                    threshold: x,
                    window: cfg.window,
                    graduation,
                };
                (x, discoverable_series(&arm_log, &q, horizon))
            })
            .collect();
        let mut impressions = vec![0usize; horizon as usize];
        let mut positives = vec![0usize; horizon as usize];
        for r in &arm_log {
            if let Some(slot) = impressions.get_mut(r.day as usize) {
                *slot += 1;
                positives[r.day as usize] += usize::from(r.reward);
            }
        }
        let cumulative = match truth {
            Some(truth) => {
                let arm_traces: Vec<RequestTrace> = traces.iter().filter(|t| t.arm == arm).cloned().collect();
                daily_regret(&arm_log, &arm_traces, truth, horizon)
            }
            None => Vec::new(),
        };
        for (x, n) in corpus_histogram(&arm_log, cfg.window, graduation, &cfg.histogram) {
            report.histogram.push((arm, x, n));
        }
        report
            .freshness
            .push((arm, freshness_buckets(&arm_log, corpus, &cfg.freshness_edges)));
        report.arms.push(ArmSeries {
            arm,
            discoverable,
            satisfied: satisfied_series(&arm_log, horizon, cfg.satisfied_threshold),
            impressions,
            positives,
            cumulative_regret: cumulative,
        });
    }
    report
}

fn daily_regret(
    log: &[InteractionRecord],
    traces: &[RequestTrace],
    truth: &dyn Fn(UserId, ContentId) -> f64,
    horizon: u32,
) -> Vec<f64> {
    if traces.is_empty() {
        return Vec::new();
    }
    let series = cumulative_regret(log, traces, truth);
    let mut out = vec![0.0; horizon as usize];
    let mut last = 0.0;
    let mut t = 0;
    for (day, slot) in out.iter_mut().enumerate() {
        while t < traces.len() && traces[t].day as usize <= day {
            last = series[t];
            t += 1;
        }
        *slot = last;
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl MetricsReport {
    pub fn arm(&self, arm: ArmId) -> Option<&ArmSeries> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    fn bucket_labels(&self) -> Vec<String> {
        let mut lo = 0;
        let mut labels = Vec::new();
        for &e in &self.freshness_edges {
            labels.push(format!("[{lo},{e})"));
            lo = e;
        }
        labels.push(format!("[{lo},inf)"));
        labels
    }

    /// Long-format rows `arm  day  metric  value`. Whole-run metrics use
    /// `-` for the day.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# arm\tday\tmetric\tvalue\n");
        for a in &self.arms {
            for day in 0..self.horizon as usize {
                for (x, series) in &a.discoverable {
                    let _ = writeln!(s, "{}\t{day}\tdiscoverable@{x},{}\t{}", a.arm, self.window, series[day]);
                }
                let _ = writeln!(s, "{}\t{day}\tsatisfied_users\t{}", a.arm, a.satisfied[day]);
                let _ = writeln!(s, "{}\t{day}\timpressions\t{}", a.arm, a.impressions[day]);
                let _ = writeln!(s, "{}\t{day}\tpositives\t{}", a.arm, a.positives[day]);
                if let Some(r) = a.cumulative_regret.get(day) {
                    let _ = writeln!(s, "{}\t{day}\tcumulative_regret\t{r}", a.arm);
                }
            }
        }
        for (arm, x, n) in &self.histogram {
            let _ = writeln!(s, "{arm}\t-\tat_least@{x},{}\t{n}", self.window);
        }
        let labels = self.bucket_labels();
        for (arm, counts) in &self.freshness {
            for (label, n) in labels.iter().zip(counts) {
                let _ = writeln!(s, "{arm}\t-\tfreshness{label}\t{n}");
            }
        }
        for t in &self.correlations {
            for r in &t.rows {
                let _ = writeln!(
                    s,
                    "{}\t-\tspearman:{}:{}\t{}",
                    t.arm,
                    t.label,
                    r.feature,
                    fmt_opt(r.estimate)
                );
                let _ = writeln!(
                    s,
                    "{}\t-\tspearman_se:{}:{}\t{}",
                    t.arm,
                    t.label,
                    r.feature,
                    fmt_opt(r.std_error)
                );
            }
        }
        s
    }

    /// Human-readable summary at the horizon.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "horizon {} days, post-graduation window {} days", self.horizon, self.window);
        let _ = writeln!(s);
        let mut header = format!("{:>5}", "arm");
        if let Some(a) = self.arms.first() {
            for (x, _) in &a.discoverable {
                header += &format!(" {:>14}", format!("disc@{x},{}", self.window));
            }
        }
        header += &format!(" {:>11} {:>12} {:>10} {:>12}", "satisfied", "impressions", "positives", "regret");
        let _ = writeln!(s, "{header}");
        for a in &self.arms {
            let mut line = format!("{:>5}", a.arm.to_string());
            for (_, series) in &a.discoverable {
                line += &format!(" {:>14}", series.last().copied().unwrap_or(0));
            }
            let regret = a
                .cumulative_regret
                .last()
                .map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
            let _ = writeln!(
                s,
                "{line} {:>11} {:>12} {:>10} {:>12}",
                a.satisfied.last().copied().unwrap_or(0),
                a.impressions.iter().sum::<usize>(),
                a.positives.iter().sum::<usize>(),
                regret
            );
        }
        if !self.histogram.is_empty() {
            let _ = writeln!(s, "\nitems with at least X positives within {} days of graduating", self.window);
            for (arm, x, n) in &self.histogram {
                let _ = writeln!(s, "  arm {arm:>3}  X={x:<5} {n}");
            }
        }
        if !self.freshness.is_empty() {
            let _ = writeln!(s, "\npositives by item age (days)");
            let labels = self.bucket_labels();
            for (arm, counts) in &self.freshness {
                let cells: Vec<String> = labels.iter().zip(counts).map(|(l, n)| format!("{l} {n}")).collect();
                let _ = writeln!(s, "  arm {arm:>3}  {}", cells.join("  "));
            }
        }
        for t in &self.correlations {
            s.push('\n');
            s.push_str(&t.to_text());
        }
        s
    }
}
