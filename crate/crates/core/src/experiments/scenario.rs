use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AblationSpec, AblationSweep, DiversionMode, DiversionPlan, LearnerSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::ranker::TrainConfig;
use crate::sim::{ArmId, DedicatedSlots, NominatorSpec, WorldConfig};

/// Serving and training setup of one arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub arm: ArmId,
    pub learner: LearnerSpec,
    pub nominators: Vec<NominatorSpec>,
    pub slate_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedicated: Option<DedicatedSlots>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_mask: Option<Vec<bool>>,
}

/// Acceptable range of the relative discoverable-corpus difference
/// `(treatment - control) / max(control, 1)` between two identical arms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaBand {
    pub threshold: u64,
    pub lower: f64,
    pub upper: f64,
    /// Number of A/A seeds the band was estimated from.
    pub seeds: usize,
}

/// Where uncertainty probe pairs come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSource {
    /// Random users of the arm crossed with random visible items.
    #[default]
    Corpus,
    /// User and item drawn independently from the arm's impressions in the
    /// last `days` days, so both follow traffic without being paired.
    Impressions { days: u32 },
    /// A random candidate nominated against the final corpus for a user drawn
    /// from the arm's impressions in the last `days` days, paired with a
    /// second, independent user from the same impressions.
    Candidates { days: u32 },
}

/// Sampling setup for uncertainty-versus-feature correlations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyProbe {
    pub pairs: usize,
    pub resamples: usize,
    pub source: ProbeSource,
}

impl Default for UncertaintyProbe {
    fn default() -> Self {
        Self {
            pairs: 2_000,
            resamples: 20,
            source: ProbeSource::Corpus,
        }
    }
}

/// A closed-loop experiment: a world, a diversion plan and one spec per arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seeds: Vec<u64>,
    pub world: WorldConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub plan: DiversionPlan,
    pub arms: Vec<ArmSpec>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub probe: UncertaintyProbe,
    /// Control arm for lifts and A/A variants.
    #[serde(default)]
    pub control: ArmId,
    #[serde(default)]
    pub aa_bands: Vec<AaBand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation_sweep: Option<AblationSweep>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.train.validate()?;
        for a in &self.arms {
            if a.slate_size == 0 {
                return Err(Error::InvalidConfig(format!("arm {} has an empty slate", a.arm)));
            }
            a.learner.network.validate()?;
            if a.learner.network.user_dim != self.world.user_feature_dim()
                || a.learner.network.content_dim != self.world.content_feature_dim()
            {
                return Err(Error::InvalidConfig(format!(
                    "arm {} network expects {}+{} inputs, world provides {}+{}",
                    a.arm,
                    a.learner.network.user_dim,
                    a.learner.network.content_dim,
                    self.world.user_feature_dim(),
                    self.world.content_feature_dim()
                )));
            }
        }
        for split in self.plan.arms() {
            if self.arm(split.arm).is_none() {
                return Err(Error::InvalidConfig(format!("plan diverts to arm {} with no spec", split.arm)));
            }
        }
        Ok(())
    }

    pub fn arm(&self, arm: ArmId) -> Option<&ArmSpec> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn is_codiverted(&self) -> bool {
        self.plan.mode() == DiversionMode::UserCorpusCoDiverted
    }

    /// Arms other than the control.
    pub fn treatments(&self) -> impl Iterator<Item = ArmId> + '_ {
        self.arms.iter().map(|a| a.arm).filter(move |&a| a != self.control)
    }

    /// Same scenario with every arm configured like the control.
    pub fn aa_variant(&self) -> Result<Self> {
        let control = self
            .arm(self.control)
            .ok_or_else(|| Error::InvalidConfig(format!("control arm {} has no spec", self.control)))?
            .clone();
        let mut sc = self.clone();
        for a in &mut sc.arms {
            let id = a.arm;
            *a = control.clone();
            a.arm = id;
        }
        sc.name = format!("{}-aa", self.name);
        Ok(sc)
    }

    pub fn band(&self, threshold: u64) -> Option<&AaBand> {
        self.aa_bands.iter().find(|b| b.threshold == threshold)
    }
}
