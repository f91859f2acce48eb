//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use nlb_core::bayes_linear::{CovarianceAccumulator, Strategy};
use nlb_core::ranker::{Candidate, MeanSource, Policy};
use nlb_core::representation::{FeatureRecord, RepresentationModel};
use nlb_core::sim::ContentId;

/// Ridge solution from the stacked design matrix, solved by LU.
pub fn batch_ridge(d: usize, eps: f64, rows: &[Vec<f64>], rewards: &[f64]) -> DVector<f64> {
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(rewards);
    let a = DMatrix::identity(d, d) * eps + x.transpose() * &x;
    a.lu().solve(&(x.transpose() * y)).expect("ridge system is nonsingular")
}

/// Probability that each independent Gaussian is the largest, by Simpson's
/// rule on `p_i(x) * prod_{j != i} F_j(x)` over a wide grid.
pub fn gaussian_argmax(means: &[f64], sds: &[f64]) -> Vec<f64> {
    let dists: Vec<Normal> = means.iter().zip(sds).map(|(&m, &s)| Normal::new(m, s).unwrap()).collect();
    let lo = means.iter().zip(sds).map(|(m, s)| m - 12.0 * s).fold(f64::INFINITY, f64::min);
    let hi = means.iter().zip(sds).map(|(m, s)| m + 12.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    (0..dists.len())
        .map(|i| {
            let f = |x: f64| {
                dists[i].pdf(x)
                    * dists
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, d)| d.cdf(x))
                        .product::<f64>()
            };
            let mut s = f(lo) + f(hi);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(lo + k as f64 * h);
            }
            s * h / 3.0
        })
        .collect()
}

/// Average ranks (1-based) with ties sharing the mean rank, by counting.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation of average ranks, computed in the quadratic way.
pub fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Neural-linear policy on an identity representation, so candidate `i`'s
/// representation is its user feature vector. The posterior is fit to
/// `samples` random rows.
pub fn identity_policy(d: usize, samples: usize, sigma_sq: f64, seed: u64) -> (Policy, Vec<Candidate>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut acc = CovarianceAccumulator::new(d, 1.0, sigma_sq).unwrap();
    for _ in 0..samples {
        let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: f64 = phi.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
        acc.accumulate(&phi, y).unwrap();
    }
    let policy = Policy::NeuralLinearTs {
        model: Arc::new(RepresentationModel::identity(d, 0.0).unwrap()),
        posterior: Arc::new(acc.finalize(Strategy::Cholesky).unwrap()),
        mean: MeanSource::PosteriorMean,
    };
    let candidates = (0..5)
        .map(|i| Candidate {
            id: ContentId(i),
            features: FeatureRecord::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), vec![]),
        })
        .collect();
    (policy, candidates)
}
