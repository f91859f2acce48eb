use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes_linear::{CovarianceAccumulator, Strategy};
use crate::error::{Error, Result};
use crate::hashing::{substream, tag};
use crate::ranker::{rank, training_run, Candidate, MeanSource, Policy, TrainConfig};
use crate::representation::{FeatureRecord, RepresentationModel};
use crate::sim::ContentId;

/// Linear-Gaussian bandit with a known identity representation.
///
/// Every round draws `arms` fresh contexts `x ~ N(0, I/dim)`; pulling one
/// pays `x . theta + N(0, noise_sd^2)` with `theta ~ N(0, I)` fixed per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearBanditConfig {
    pub arms: usize,
    pub dim: usize,
    pub horizon: usize,
    /// Rounds between training runs of the bandit.
    pub update_every: usize,
    pub noise_sd: f64,
    pub epsilon: f64,
    pub sigma_sq: f64,
    pub strategy: Strategy,
    /// Std of the per-coordinate error in the greedy baseline's fixed head.
    pub misspecification: f64,
    pub seeds: Vec<u64>,
}

impl Default for LinearBanditConfig {
    fn default() -> Self {
        Self {
            arms: 20,
            dim: 8,
            horizon: 10_000,
            update_every: 10,
            noise_sd: 0.5,
            epsilon: 1.0,
            sigma_sq: 0.25,
            strategy: Strategy::PseudoInverse,
            misspecification: 1.0,
            seeds: (0..10).collect(),
        }
    }
}

impl LinearBanditConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 || self.dim == 0 || self.horizon == 0 || self.update_every == 0 {
            return Err(Error::InvalidConfig(
                "arms, dim, horizon and update_every must be positive".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.misspecification >= 0.0) {
            return Err(Error::InvalidConfig("noise and misspecification must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditAlgorithm {
    /// Thompson sampling from the Bayesian linear head, retrained every
    /// `update_every` rounds.
    NeuralLinear,
    /// Greedy on `theta + error`, never updated.
    MisspecifiedGreedy,
}

/// Per-round regret of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub per_round: Vec<f64>,
}

impl RegretTrace {
    pub fn cumulative(&self) -> Vec<f64> {
        self.per_round
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.per_round.iter().sum()
    }

    /// Regret summed over the first and the last tenth of the rounds.
    pub fn first_and_last_decile(&self) -> (f64, f64) {
        let n = self.per_round.len();
        let d = (n / 10).max(1).min(n);
        let first = self.per_round[..d].iter().sum();
        let last = self.per_round[n - d..].iter().sum();
        (first, last)
    }
}

fn gaussian_vec<R: Rng + ?Sized>(dim: usize, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs one seed. The environment's contexts, rewards and parameter come from
/// streams independent of the algorithm, so both algorithms face the same
/// rounds.
pub fn run_linear_bandit(cfg: &LinearBanditConfig, algo: BanditAlgorithm, seed: u64) -> Result<RegretTrace> {
    cfg.validate()?;
    let mut env = substream(seed, &[tag::WORLD]);
    let mut noise_rng = substream(seed, &[tag::REWARD]);
    let mut serve = substream(seed, &[tag::SERVE]);
    let theta = gaussian_vec(cfg.dim, 1.0, &mut env);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let context_sd = 1.0 / (cfg.dim as f64).sqrt();

    let mut model = RepresentationModel::identity(cfg.dim, 0.0)?;
    let mut acc = CovarianceAccumulator::new(cfg.dim, cfg.epsilon, cfg.sigma_sq)?;
    let train = TrainConfig {
        strategy: cfg.strategy,
        ..TrainConfig::default()
    };
    let mut policy = match algo {
        BanditAlgorithm::NeuralLinear => Policy::NeuralLinearTs {
            model: Arc::new(model.clone()),
            posterior: Arc::new(acc.finalize(cfg.strategy)?),
            mean: MeanSource::PosteriorMean,
        },
        BanditAlgorithm::MisspecifiedGreedy => {
            let mut head = theta.clone();
            let mut err = substream(seed, &[tag::TRAIN]);
            for (h, e) in head.iter_mut().zip(gaussian_vec(cfg.dim, cfg.misspecification, &mut err)) {
                *h += e;
            }
            let mut m = model.clone();
            m.set_head(&head)?;
            Policy::greedy(m)
        }
    };

    let mut pending: Vec<(FeatureRecord, f64)> = Vec::with_capacity(cfg.update_every);
    let mut per_round = Vec::with_capacity(cfg.horizon);
    for round in 0..cfg.horizon {
        let contexts: Vec<Vec<f64>> = (0..cfg.arms).map(|_| gaussian_vec(cfg.dim, context_sd, &mut env)).collect();
        let eps = noise.sample(&mut noise_rng);
        let candidates: Vec<Candidate> = contexts
            .iter()
            .enumerate()
            .map(|(i, x)| Candidate {
                id: ContentId(i as u32),
                features: FeatureRecord::new(x.clone(), Vec::new()),
            })
            .collect();
        let slate = rank(&policy, &candidates, 1, &mut serve)?;
        let chosen = slate[0].id.index();
        let means: Vec<f64> = contexts.iter().map(|x| dot(x, &theta)).collect();
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        per_round.push(best - means[chosen]);

        if algo == BanditAlgorithm::NeuralLinear {
            pending.push((candidates[chosen].features.clone(), means[chosen] + eps));
            if (round + 1) % cfg.update_every == 0 {
                let batch: Vec<(&FeatureRecord, f64)> = pending.iter().map(|(f, r)| (f, *r)).collect();
                let posterior = training_run(&mut model, &batch, &mut acc, &train)?;
                policy = Policy::NeuralLinearTs {
                    model: Arc::new(model.clone()),
                    posterior: Arc::new(posterior),
                    mean: MeanSource::PosteriorMean,
                };
                pending.clear();
            }
        }
    }
    Ok(RegretTrace { per_round })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deciles_of_a_ramp() {
        let t = RegretTrace {
            per_round: (0..100).map(f64::from).collect(),
        };
        let (a, b) = t.first_and_last_decile();
        assert_eq!(a, 45.0);
        assert_eq!(b, 945.0);
        assert_eq!(*t.cumulative().last().unwrap(), t.total());
    }

    #[test]
    fn exact_head_has_zero_regret() {
        let cfg = LinearBanditConfig {
            horizon: 200,
            misspecification: 0.0,
            ..LinearBanditConfig::default()
        };
        let t = run_linear_bandit(&cfg, BanditAlgorithm::MisspecifiedGreedy, 3).unwrap();
        assert!(t.per_round.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn regret_is_nonnegative() {
        let cfg = LinearBanditConfig {
            horizon: 300,
            ..LinearBanditConfig::default()
        };
        let t = run_linear_bandit(&cfg, BanditAlgorithm::NeuralLinear, 1).unwrap();
        assert!(t.per_round.iter().all(|&r| r >= 0.0));
    }
}
