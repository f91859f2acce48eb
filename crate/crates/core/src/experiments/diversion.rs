use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{salted_hash, unit_interval};
use crate::sim::{ArmId, ProviderId, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversionMode {
    UserOnly,
    UserCorpusCoDiverted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSplit {
    pub arm: ArmId,
    pub user_fraction: f64,
    #[serde(default)]
    pub corpus_fraction: f64,
}

/// Deterministic hash bucketing of users, and of providers under
/// codiversion, into arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct DiversionPlan {
    salt: String,
    arms: Vec<ArmSplit>,
    mode: DiversionMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    salt: String,
    arms: Vec<ArmSplit>,
    mode: DiversionMode,
}

impl TryFrom<RawPlan> for DiversionPlan {
    type Error = Error;

    fn try_from(raw: RawPlan) -> Result<Self> {
        Self::new(raw.salt, raw.arms, raw.mode)
    }
}

const FRACTION_SLACK: f64 = 1e-12;

impl DiversionPlan {
    pub fn new(salt: impl Into<String>, arms: Vec<ArmSplit>, mode: DiversionMode) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let (mut users, mut corpus) = (0.0, 0.0);
        for a in &arms {
            if !seen.insert(a.arm) {
                return Err(Error::InvalidConfig(format!("arm {} listed twice", a.arm)));
            }
            for f in [a.user_fraction, a.corpus_fraction] {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidConfig(format!("arm {} fraction {f} outside [0, 1]", a.arm)));
                }
            }
            if mode == DiversionMode::UserCorpusCoDiverted && (a.user_fraction - a.corpus_fraction).abs() > FRACTION_SLACK
            {
                return Err(Error::InvalidConfig(format!(
                    "arm {} diverts {} of users but {} of corpus",
                    a.arm, a.user_fraction, a.corpus_fraction
                )));
            }
            users += a.user_fraction;
            corpus += a.corpus_fraction;
        }
        if users > 1.0 + FRACTION_SLACK || corpus > 1.0 + FRACTION_SLACK {
            return Err(Error::InvalidConfig("arm fractions sum past 1".into()));
        }
        Ok(Self {
            salt: salt.into(),
            arms,
            mode,
        })
    }

    /// Codiverted plan with equal user and corpus shares.
    pub fn codiverted(salt: impl Into<String>, shares: &[(ArmId, f64)]) -> Result<Self> {
        let arms = shares
            .iter()
            .map(|&(arm, f)| ArmSplit {
                arm,
                user_fraction: f,
                corpus_fraction: f,
            })
            .collect();
        Self::new(salt, arms, DiversionMode::UserCorpusCoDiverted)
    }

    pub fn user_only(salt: impl Into<String>, shares: &[(ArmId, f64)]) -> Result<Self> {
        let arms = shares
            .iter()
            .map(|&(arm, f)| ArmSplit {
                arm,
                user_fraction: f,
                corpus_fraction: 0.0,
            })
            .collect();
        Self::new(salt, arms, DiversionMode::UserOnly)
    }

    pub fn salt(&self) -> &str {
        &self.salt
    }

    pub fn arms(&self) -> &[ArmSplit] {
        &self.arms
    }

    pub fn mode(&self) -> DiversionMode {
        self.mode
    }
}

fn bucket(u: f64, fractions: impl Iterator<Item = (ArmId, f64)>) -> Option<ArmId> {
    let mut upper = 0.0;
    for (arm, f) in fractions {
        upper += f;
        if u < upper {
            return Some(arm);
        }
    }
    None
}

/// Arm of a user, or `None` when the user falls outside every arm.
pub fn assign_user(user: UserId, plan: &DiversionPlan) -> Option<ArmId> {
    let u = unit_interval(salted_hash(plan.salt.as_bytes(), u64::from(user.0)));
    bucket(u, plan.arms.iter().map(|a| (a.arm, a.user_fraction)))
}

/// Arm that owns a provider's items. Only defined for codiverted plans.
pub fn assign_corpus(provider: ProviderId, plan: &DiversionPlan) -> Result<Option<ArmId>> {
    if plan.mode != DiversionMode::UserCorpusCoDiverted {
        return Err(Error::NotCoDiverted);
    }
    let mut salt = plan.salt.as_bytes().to_vec();
    salt.extend_from_slice(b"corpus");
    let u = unit_interval(salted_hash(&salt, u64::from(provider.0)));
    Ok(bucket(u, plan.arms.iter().map(|a| (a.arm, a.corpus_fraction))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_single_arm_takes_everyone() {
        let plan = DiversionPlan::user_only("s", &[(ArmId(3), 1.0)]).unwrap();
        for i in 0..1000 {
            assert_eq!(assign_user(UserId(i), &plan), Some(ArmId(3)));
        }
    }

    #[test]
    fn assignment_is_stable() {
        let plan = DiversionPlan::codiverted("exp", &[(ArmId(0), 0.5), (ArmId(1), 0.5)]).unwrap();
        for i in 0..100 {
            assert_eq!(assign_user(UserId(i), &plan), assign_user(UserId(i), &plan));
            assert_eq!(
                assign_corpus(ProviderId(i), &plan).unwrap(),
                assign_corpus(ProviderId(i), &plan).unwrap()
            );
        }
    }

    #[test]
    fn user_only_plan_has_no_corpus_assignment() {
        let plan = DiversionPlan::user_only("s", &[(ArmId(0), 0.5)]).unwrap();
        assert!(matches!(assign_corpus(ProviderId(1), &plan), Err(Error::NotCoDiverted)));
    }

    #[test]
    fn rejects_bad_plans() {
        let split = |u, c| ArmSplit {
            arm: ArmId(0),
            user_fraction: u,
            corpus_fraction: c,
        };
        assert!(DiversionPlan::new("s", vec![split(0.1, 0.2)], DiversionMode::UserCorpusCoDiverted).is_err());
        assert!(DiversionPlan::new("s", vec![split(0.1, 0.2)], DiversionMode::UserOnly).is_ok());
        assert!(DiversionPlan::user_only("s", &[(ArmId(0), 0.6), (ArmId(1), 0.6)]).is_err());
        assert!(DiversionPlan::user_only("s", &[(ArmId(0), 0.2), (ArmId(0), 0.2)]).is_err());
    }

    #[test]
    fn plan_round_trips_through_toml() {
        let plan = DiversionPlan::codiverted("exp", &[(ArmId(0), 0.5), (ArmId(1), 0.5)]).unwrap();
        let text = toml::to_string(&plan).unwrap();
        let back: DiversionPlan = toml::from_str(&text).unwrap();
        assert_eq!(back, plan);
        let broken = text.replacen("corpus_fraction = 0.5", "corpus_fraction = 0.4", 1);
        assert!(toml::from_str::<DiversionPlan>(&broken).is_err());
    }
}
