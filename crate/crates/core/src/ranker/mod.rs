//! Ranking policies over a candidate slate and the per-run training loop.
//!
//! Every policy scores in logit space. Greedy uses the mean logit; the two
//! Thompson-sampling policies draw one logit per candidate from a Gaussian
//! whose variance comes either from the Bayesian linear head over the
//! network representation or from disagreement across an ensemble. Slates
//! are sorted by the drawn logit, which orders candidates exactly as the
//! sigmoid of it would.

mod ensemble;
mod training;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use ensemble::Ensemble;
pub use training::{train_ensemble, train_model, training_run, training_runs, TrainConfig};

use crate::bayes_linear::{PosteriorState, ScoreDistribution};
use crate::bayes_linear::{check_dim, FeatureVector};
use crate::error::Result;
use crate::representation::{sigmoid, FeatureRecord, RepresentationModel, Scratch};
use crate::sim::ContentId;

pub(crate) use ensemble::mean_and_unbiased_variance;

/// Where the Thompson-sampling mean comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSource {
    /// The network's own logit.
    #[default]
    NetworkLogit,
    /// `phi^T beta_hat` from the Bayesian head.
    PosteriorMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    NeuralLinearTs,
    EnsembleTs,
}

/// What a greedy policy scores with.
#[derive(Clone, Debug)]
pub enum Scorer {
    Model(Arc<RepresentationModel>),
    /// Mean logit across members.
    EnsembleMean(Arc<Ensemble>),
}

/// A servable policy snapshot. Cheap to clone; never mutated.
#[derive(Clone, Debug)]
pub enum Policy {
    Greedy(Scorer),
    NeuralLinearTs {
        model: Arc<RepresentationModel>,
        posterior: Arc<PosteriorState>,
        mean: MeanSource,
    },
    EnsembleTs(Arc<Ensemble>),
}

impl Policy {
    pub fn greedy(model: RepresentationModel) -> Self {
        Policy::Greedy(Scorer::Model(Arc::new(model)))
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Greedy(_) => PolicyKind::Greedy,
            Policy::NeuralLinearTs { .. } => PolicyKind::NeuralLinearTs,
            Policy::EnsembleTs(_) => PolicyKind::EnsembleTs,
        }
    }

    /// Logit-space belief about one candidate.
    pub fn score_distribution(&self, rec: &FeatureRecord) -> Result<ScoreDistribution> {
        let mut ws = Workspace::default();
        self.distribution_with(&rec.user, &rec.content, &mut ws)
    }

    /// Variance of the logit belief; zero for greedy policies.
    pub fn uncertainty(&self, rec: &FeatureRecord) -> Result<f64> {
        Ok(self.score_distribution(rec)?.variance)
    }

    fn distribution_with(&self, user: &[f64], content: &[f64], ws: &mut Workspace) -> Result<ScoreDistribution> {
        match self {
            Policy::Greedy(Scorer::Model(model)) => {
                model.embed_into(user, content, &mut ws.scratch, &mut ws.phi)?;
                Ok(ScoreDistribution {
                    mean: model.logit_from_embedding(&ws.phi),
                    variance: 0.0,
                })
            }
            Policy::Greedy(Scorer::EnsembleMean(ens)) => {
                ens.logits_into(user, content, &mut ws.scratch, &mut ws.phi, &mut ws.logits)?;
                Ok(ScoreDistribution {
                    mean: mean_and_unbiased_variance(&ws.logits).mean,
                    variance: 0.0,
                })
            }
            Policy::NeuralLinearTs { model, posterior, mean } => {
                model.embed_into(user, content, &mut ws.scratch, &mut ws.phi)?;
                let variance = posterior.variance(&ws.phi)?;
                let mean = match mean {
                    MeanSource::NetworkLogit => model.logit_from_embedding(&ws.phi),
                    MeanSource::PosteriorMean => posterior.mean(&ws.phi)?,
                };
                Ok(ScoreDistribution { mean, variance })
            }
            Policy::EnsembleTs(ens) => {
                ens.logits_into(user, content, &mut ws.scratch, &mut ws.phi, &mut ws.logits)?;
                Ok(mean_and_unbiased_variance(&ws.logits))
            }
        }
    }
}

/// A nominated item with the features the ranker sees.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub id: ContentId,
    pub features: FeatureRecord,
}

/// One slate entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ranked {
    pub id: ContentId,
    /// Logit the slate was ordered by (sampled for exploring slots).
    pub logit: f64,
    /// `sigmoid(logit)`, the served probability score.
    pub score: f64,
    pub mean_logit: f64,
    pub variance: f64,
    pub explored: bool,
}

#[derive(Default)]
struct Workspace {
    scratch: Scratch,
    phi: Vec<f64>,
    logits: Vec<f64>,
}

struct Scored {
    id: ContentId,
    mean: f64,
    variance: f64,
    sampled: f64,
}

/// Top-`k` slate with every slot exploring.
pub fn rank<R: Rng + ?Sized>(policy: &Policy, candidates: &[Candidate], k: usize, rng: &mut R) -> Result<Vec<Ranked>> {
    let mask = vec![true; k.min(candidates.len())];
    rank_with_mask(policy, candidates, &mask, rng)
}

/// Fills slot `i` with the best remaining candidate by sampled logit when
/// `mask[i]` is set, otherwise by mean logit. Ties go to the smaller content id.
/// The slate length is `min(mask.len(), candidates.len())`.
pub fn rank_with_mask<R: Rng + ?Sized>(
    policy: &Policy,
    candidates: &[Candidate],
    mask: &[bool],
    rng: &mut R,
) -> Result<Vec<Ranked>> {
    let k = mask.len().min(candidates.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut ws = Workspace::default();
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let dist = policy.distribution_with(&c.features.user, &c.features.content, &mut ws)?;
        let sampled = if dist.variance > 0.0 {
            crate::bayes_linear::sample_normal(dist.mean, dist.variance, rng)
        } else {
            dist.mean
        };
        scored.push(Scored {
            id: c.id,
            mean: dist.mean,
            variance: dist.variance,
            sampled,
        });
    }
    let by = |explore: bool| {
        move |a: &Scored, b: &Scored| {
            let (x, y) = if explore { (a.sampled, b.sampled) } else { (a.mean, b.mean) };
            y.total_cmp(&x).then(a.id.cmp(&b.id))
        }
    };
    if mask[..k].iter().all(|&m| m) || mask[..k].iter().all(|&m| !m) {
        let explore = mask[0];
        scored.sort_by(by(explore));
        return Ok(scored
            .into_iter()
            .take(k)
            .map(|s| finish(s, explore))
            .collect());
    }
    let mut slate = Vec::with_capacity(k);
    for &explore in &mask[..k] {
        let cmp = by(explore);
        let (best, _) = scored
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| cmp(a, b))
            .expect("fewer slots than candidates");
        slate.push(finish(scored.swap_remove(best), explore));
    }
    Ok(slate)
}

fn finish(s: Scored, explored: bool) -> Ranked {
    let logit = if explored { s.sampled } else { s.mean };
    Ranked {
        id: s.id,
        logit,
        score: sigmoid(logit),
        mean_logit: s.mean,
        variance: s.variance,
        explored,
    }
}

/// Strictly increasing link from logit to probability.
pub fn sigmoid_link(logit: f64) -> f64 {
    sigmoid(logit)
}

/// Representation of a record under a model, as the Bayesian head sees it.
pub fn representation(model: &RepresentationModel, rec: &FeatureRecord) -> Result<FeatureVector> {
    let phi = model.embed(rec)?;
    check_dim(model.embedding_dim(), &phi)?;
    Ok(phi)
}
