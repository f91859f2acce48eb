use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::substream;

/// Ranks starting at 1; tied values share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant ranks"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One `(user, item)` pair: the policy's uncertainty and the features it is
/// correlated against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintySample {
    pub variance: f64,
    pub content_age: f64,
    pub popularity: f64,
    pub user_activity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub feature: String,
    /// `None` when the correlation is undefined (constant input).
    pub estimate: Option<f64>,
    /// Standard deviation over bootstrap resamples.
    pub std_error: Option<f64>,
}

/// Spearman correlation of uncertainty against content age, content
/// popularity and user activity, with bootstrap standard errors over
/// `resamples` draws seeded by `seed`.
pub fn uncertainty_feature_correlations(
    samples: &[UncertaintySample],
    resamples: usize,
    seed: u64,
) -> Vec<CorrelationRow> {
    let variance: Vec<f64> = samples.iter().map(|s| s.variance).collect();
    let features: [(&str, Vec<f64>); 3] = [
        ("content_age", samples.iter().map(|s| s.content_age).collect()),
        ("popularity", samples.iter().map(|s| s.popularity).collect()),
        ("user_activity", samples.iter().map(|s| s.user_activity).collect()),
    ];
    let mut rng = substream(seed, &[0xC022]);
    let draws: Vec<Vec<usize>> = (0..resamples)
        .map(|_| (0..samples.len()).map(|_| rng.random_range(0..samples.len())).collect())
        .collect();
    features
        .iter()
        .map(|(name, f)| {
            let estimate = spearman(&variance, f).ok();
            let boot: Vec<f64> = draws
                .iter()
                .filter_map(|idx| {
                    let v: Vec<f64> = idx.iter().map(|&i| variance[i]).collect();
                    let g: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
                    spearman(&v, &g).ok()
                })
                .collect();
            let std_error = (estimate.is_some() && boot.len() >= 2).then(|| {
                let m = boot.iter().sum::<f64>() / boot.len() as f64;
                (boot.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (boot.len() - 1) as f64).sqrt()
            });
            CorrelationRow {
                feature: (*name).to_string(),
                estimate,
                std_error,
            }
        })
        .collect()
}
