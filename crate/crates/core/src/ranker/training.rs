use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::bayes_linear::{CovarianceAccumulator, PosteriorState, Strategy};
use crate::error::{Error, Result};
use crate::representation::{FeatureRecord, RepresentationModel, Scratch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Consecutive training runs performed by [`training_runs`].
    pub runs: usize,
    /// The log is cut into this many contiguous batches per run.
    pub batches_per_run: usize,
    /// Minibatch size for the gradient steps inside each batch.
    pub batch_size: usize,
    #[serde(default)]
    pub strategy: Strategy,
    /// Shuffles each batch before the gradient steps when set.
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            runs: 1,
            batches_per_run: 1,
            batch_size: 64,
            strategy: Strategy::PseudoInverse,
            shuffle_seed: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.batches_per_run == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "training runs, batches and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Contiguous, near-equal split of `0..n` into `parts` ranges.
fn batch_ranges(n: usize, parts: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).scan(0, move |start, h| {
        let len = base + usize::from(h < extra);
        let r = *start..*start + len;
        *start += len;
        Some(r)
    })
}

fn minibatch_order(len: usize, seed: Option<u64>, salt: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
    }
    order
}

/// One training run over a log of `(features, reward)` examples.
///
/// For each batch, every example's representation under the current
/// parameters is folded into `acc`, then the network takes gradient steps on
/// that batch. The Gram matrix is factorized once, at the end.
pub fn training_run(
    model: &mut RepresentationModel,
    log: &[(&FeatureRecord, f64)],
    acc: &mut CovarianceAccumulator,
    cfg: &TrainConfig,
) -> Result<PosteriorState> {
    cfg.validate()?;
    if acc.dim() != model.embedding_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.embedding_dim(),
            actual: acc.dim(),
        });
    }
    let mut scratch = Scratch::default();
    let mut phi = Vec::with_capacity(model.embedding_dim());
    let mut minibatch = Vec::with_capacity(cfg.batch_size);
    for (h, range) in batch_ranges(log.len(), cfg.batches_per_run).enumerate() {
        let batch = &log[range];
        if batch.is_empty() {
            continue;
        }
        for (rec, reward) in batch {
            model.embed_into(&rec.user, &rec.content, &mut scratch, &mut phi)?;
            acc.accumulate(&phi, *reward)?;
        }
        if model.learning_rate() == 0.0 {
            continue;
        }
        let order = minibatch_order(batch.len(), cfg.shuffle_seed, acc.count() ^ h as u64);
        for chunk in order.chunks(cfg.batch_size) {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&i| batch[i]));
            model.sgd_step(&minibatch)?;
        }
    }
    acc.finalize(cfg.strategy)
}

/// `cfg.runs` consecutive training runs over the same log, carrying the
/// accumulator across runs; returns the posterior published after each run.
pub fn training_runs(
    model: &mut RepresentationModel,
    log: &[(&FeatureRecord, f64)],
    acc: &mut CovarianceAccumulator,
    cfg: &TrainConfig,
) -> Result<Vec<PosteriorState>> {
    (0..cfg.runs).map(|_| training_run(model, log, acc, cfg)).collect()
}

/// One pass of minibatch steps over the log, batch by batch.
fn sgd_pass(
    model: &mut RepresentationModel,
    log: &[(&FeatureRecord, f64)],
    cfg: &TrainConfig,
    member: u64,
) -> Result<()> {
    if model.learning_rate() == 0.0 {
        return Ok(());
    }
    let mut minibatch = Vec::with_capacity(cfg.batch_size);
    for (h, range) in batch_ranges(log.len(), cfg.batches_per_run).enumerate() {
        let batch = &log[range];
        let order = minibatch_order(batch.len(), cfg.shuffle_seed, (member << 32) | h as u64);
        for chunk in order.chunks(cfg.batch_size) {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&i| batch[i]));
            model.sgd_step(&minibatch)?;
        }
    }
    Ok(())
}

/// Gradient steps for a plain model, without a Bayesian head.
pub fn train_model(model: &mut RepresentationModel, log: &[(&FeatureRecord, f64)], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    sgd_pass(model, log, cfg, 0)
}

/// Gradient steps for every ensemble member over the log. Members see the
/// batches in different orders when shuffling is enabled.
pub fn train_ensemble(ensemble: &mut Ensemble, log: &[(&FeatureRecord, f64)], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if log.is_empty() {
        return Ok(());
    }
    match ensemble {
        Ensemble::Independent(members) => {
            for (e, member) in members.iter_mut().enumerate() {
                sgd_pass(member, log, cfg, e as u64)?;
            }
        }
        shared @ Ensemble::SharedBottom { .. } => {
            let mut minibatch = Vec::with_capacity(cfg.batch_size);
            for (h, range) in batch_ranges(log.len(), cfg.batches_per_run).enumerate() {
                let batch = &log[range];
                let order = minibatch_order(batch.len(), cfg.shuffle_seed, h as u64);
                for chunk in order.chunks(cfg.batch_size) {
                    minibatch.clear();
                    minibatch.extend(chunk.iter().map(|&i| batch[i]));
                    shared.sgd_step(&minibatch)?;
                }
            }
        }
    }
    Ok(())
}
