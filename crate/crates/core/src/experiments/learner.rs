use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bayes_linear::{CovarianceAccumulator, PosteriorState, DEFAULT_EPSILON, DEFAULT_SIGMA_SQ};
use crate::error::{Error, Result};
use crate::ranker::{
    train_ensemble, train_model, training_run, Ensemble, MeanSource, Policy, PolicyKind, Scorer, TrainConfig,
};
use crate::representation::{FeatureRecord, NetworkConfig, RepresentationModel};

fn default_ensemble_size() -> usize {
    5
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_sigma_sq() -> f64 {
    DEFAULT_SIGMA_SQ
}

/// How an arm's ranker is built and trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: PolicyKind,
    pub network: NetworkConfig,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub shared_bottom: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_sigma_sq")]
    pub sigma_sq: f64,
    #[serde(default)]
    pub mean: MeanSource,
}

impl LearnerSpec {
    pub fn new(kind: PolicyKind, network: NetworkConfig) -> Self {
        Self {
            kind,
            network,
            ensemble_size: default_ensemble_size(),
            shared_bottom: false,
            epsilon: DEFAULT_EPSILON,
            sigma_sq: DEFAULT_SIGMA_SQ,
            mean: MeanSource::NetworkLogit,
        }
    }
}

/// Mutable training state behind one arm's ranker.
#[derive(Clone, Debug)]
pub enum Learner {
    Greedy(RepresentationModel),
    NeuralLinear {
        model: RepresentationModel,
        acc: CovarianceAccumulator,
        posterior: Arc<PosteriorState>,
        mean: MeanSource,
    },
    Ensemble(Ensemble),
}

impl Learner {
    /// Fresh learner whose network seeds derive from `seed`.
    pub fn new(spec: &LearnerSpec, seed: u64) -> Result<Self> {
        let mut network = spec.network.clone();
        network.init_seed = seed;
        match spec.kind {
            PolicyKind::Greedy => Ok(Learner::Greedy(RepresentationModel::new(network)?)),
            PolicyKind::NeuralLinearTs => {
                let model = RepresentationModel::new(network)?;
                let acc = CovarianceAccumulator::new(model.embedding_dim(), spec.epsilon, spec.sigma_sq)?;
                let posterior = Arc::new(acc.finalize(Default::default())?);
                Ok(Learner::NeuralLinear {
                    model,
                    acc,
                    posterior,
                    mean: spec.mean,
                })
            }
            PolicyKind::EnsembleTs => {
                let ens = if spec.shared_bottom {
                    Ensemble::shared_bottom(&network, spec.ensemble_size, seed)?
                } else {
                    Ensemble::independent(&network, spec.ensemble_size, seed)?
                };
                Ok(Learner::Ensemble(ens))
            }
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Learner::Greedy(_) => PolicyKind::Greedy,
            Learner::NeuralLinear { .. } => PolicyKind::NeuralLinearTs,
            Learner::Ensemble(_) => PolicyKind::EnsembleTs,
        }
    }

    /// Servable snapshot of the current state.
    pub fn policy(&self) -> Policy {
        match self {
            Learner::Greedy(m) => Policy::Greedy(Scorer::Model(Arc::new(m.clone()))),
            Learner::NeuralLinear {
                model, posterior, mean, ..
            } => Policy::NeuralLinearTs {
                model: Arc::new(model.clone()),
                posterior: Arc::clone(posterior),
                mean: *mean,
            },
            Learner::Ensemble(e) => Policy::EnsembleTs(Arc::new(e.clone())),
        }
    }

    /// One training run over `log`.
    pub fn train(&mut self, log: &[(&FeatureRecord, f64)], cfg: &TrainConfig) -> Result<()> {
        match self {
            Learner::Greedy(m) => train_model(m, log, cfg),
            Learner::NeuralLinear {
                model, acc, posterior, ..
            } => {
                *posterior = Arc::new(training_run(model, log, acc, cfg)?);
                Ok(())
            }
            Learner::Ensemble(e) => train_ensemble(e, log, cfg),
        }
    }

    pub fn ensemble(&self) -> Result<&Ensemble> {
        match self {
            Learner::Ensemble(e) => Ok(e),
            _ => Err(Error::InvalidConfig("learner is not an ensemble".into())),
        }
    }
}
