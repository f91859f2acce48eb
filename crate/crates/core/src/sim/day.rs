use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::nominator::{nominate_with, CorpusIndex, NominatorSpec};
use super::world::WorldState;
use super::{ArmId, ContentId, UserId};
use crate::error::{Error, Result};
use crate::experiments::{ablate_nominations, AblationSpec};
use crate::hashing::{substream, tag};
use crate::ranker::{rank_with_mask, Candidate, Policy};
use crate::representation::FeatureRecord;

/// Slots reserved for one nominator's candidates, ranked by the arm's policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedicatedSlots {
    pub slots: usize,
    pub nominator: NominatorSpec,
}

/// Everything one arm needs to serve a request.
#[derive(Clone, Debug)]
pub struct ArmPlan {
    pub policy: Policy,
    pub nominators: Vec<NominatorSpec>,
    pub slate_size: usize,
    pub dedicated: Option<DedicatedSlots>,
    pub ablation: Option<AblationSpec>,
    /// Per-slot exploration switch over the final slate (standard slots
    /// first, then dedicated). `None` explores every slot.
    pub explore_mask: Option<Vec<bool>>,
}

impl ArmPlan {
    pub fn new(policy: Policy, nominators: Vec<NominatorSpec>, slate_size: usize) -> Self {
        Self {
            policy,
            nominators,
            slate_size,
            dedicated: None,
            ablation: None,
            explore_mask: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub day: u32,
    pub request: u64,
    pub user: UserId,
    pub content: ContentId,
    /// 1 when the user completed the item.
    pub reward: u8,
    pub served_score: f64,
    pub arm: ArmId,
    /// Ranker inputs at serving time; dropped when logs are archived.
    pub features: Option<FeatureRecord>,
}

impl InteractionRecord {
    pub fn is_positive(&self) -> bool {
        self.reward == 1
    }
}

/// Candidate set of one request, for regret accounting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequestTrace {
    pub request: u64,
    pub day: u32,
    pub user: UserId,
    pub arm: ArmId,
    pub candidates: Vec<ContentId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DayOutcome {
    pub day: u32,
    pub records: Vec<InteractionRecord>,
    /// Empty unless the world records candidates.
    pub traces: Vec<RequestTrace>,
    pub graduated: Vec<ContentId>,
    pub injected: Vec<ContentId>,
}

struct ArmRuntime<'a> {
    plan: &'a ArmPlan,
    index: CorpusIndex,
    serve: ChaCha8Rng,
    reward: ChaCha8Rng,
}

/// Serves one day of traffic and advances the world clock.
///
/// Users are visited in id order. Each draws `Poisson(activity)` requests
/// from a traffic stream shared by all arms, so worlds with the same seed
/// see the same demand whatever the policies. Users without an arm issue no
/// requests.
pub fn run_day(world: &mut WorldState, plans: &BTreeMap<ArmId, ArmPlan>) -> Result<DayOutcome> {
    let seed = world.config().seed;
    let day = world.day();
    let mut runtimes: BTreeMap<ArmId, ArmRuntime> = plans
        .iter()
        .map(|(&arm, plan)| {
            let a = u64::from(arm.0);
            let rt = ArmRuntime {
                plan,
                index: CorpusIndex::build(world, arm),
                serve: substream(seed, &[tag::SERVE, a, u64::from(day)]),
                reward: substream(seed, &[tag::REWARD, a, u64::from(day)]),
            };
            (arm, rt)
        })
        .collect();
    let mut traffic = substream(seed, &[tag::TRAFFIC, u64::from(day)]);
    let mut out = DayOutcome {
        day,
        ..DayOutcome::default()
    };
    for uid in 0..world.users().len() {
        let profile = &world.users()[uid];
        let (user, arm_tag) = (profile.id, profile.arm_tag);
        let requests = draw_requests(profile.activity, &mut traffic)?;
        let Some(arm) = arm_tag else { continue };
        let rt = runtimes
            .get_mut(&arm)
            .ok_or_else(|| Error::InvalidConfig(format!("user {user} is in arm {arm} which has no plan")))?;
        for _ in 0..requests {
            serve_request(world, user, arm, rt, &mut out)?;
        }
    }
    out.injected = world.end_day()?;
    Ok(out)
}

fn draw_requests<R: Rng + ?Sized>(activity: f64, rng: &mut R) -> Result<u64> {
    if activity <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(activity).map_err(|e| Error::InvalidConfig(format!("request rate: {e}")))?;
    Ok(p.sample(rng) as u64)
}

fn nominations(
    world: &WorldState,
    rt: &mut ArmRuntime,
    user: UserId,
    specs: &[NominatorSpec],
) -> Vec<Vec<ContentId>> {
    match &rt.plan.ablation {
        Some(ab) => {
            let inflated: Vec<_> = specs.iter().map(|s| s.with_n(ab.inflate(s.n()))).collect();
            let raw = nominate_with(world, &rt.index, user, &inflated, &mut rt.serve);
            ablate_nominations(&raw, ab, user)
        }
        None => nominate_with(world, &rt.index, user, specs, &mut rt.serve),
    }
}

fn candidates(world: &WorldState, user_features: &[f64], ids: &[ContentId]) -> Vec<Candidate> {
    ids.iter()
        .map(|&id| Candidate {
            id,
            features: FeatureRecord::new(user_features.to_vec(), world.content_features(id)),
        })
        .collect()
}

fn serve_request(
    world: &mut WorldState,
    user: UserId,
    arm: ArmId,
    rt: &mut ArmRuntime,
    out: &mut DayOutcome,
) -> Result<()> {
    let plan = rt.plan;
    let request = world.next_request_id();
    let k = plan.slate_size;
    let mask = |range: std::ops::Range<usize>| -> Vec<bool> {
        match &plan.explore_mask {
            Some(m) => range.map(|i| m.get(i).copied().unwrap_or(true)).collect(),
            None => vec![true; range.len()],
        }
    };
    let user_features = world.user_features(user);
    let mut seen = HashSet::new();
    let mut considered = Vec::new();

    let mut dedicated = Vec::new();
    let mut dedicated_pool = Vec::new();
    if let Some(d) = plan.dedicated.filter(|d| d.slots > 0) {
        let lists = nominations(world, rt, user, &[d.nominator]);
        for id in lists.into_iter().flatten() {
            if seen.insert(id) {
                dedicated_pool.push(id);
            }
        }
        considered.extend_from_slice(&dedicated_pool);
        let m = d.slots.min(k);
        let pool = candidates(world, &user_features, &dedicated_pool);
        // dedicated slots sit after the standard ones in the mask
        let m_mask = mask(k - m..k);
        dedicated = rank_with_mask(&plan.policy, &pool, &m_mask, &mut rt.serve)?;
    }
    let chosen: HashSet<ContentId> = dedicated.iter().map(|r| r.id).collect();

    let lists = nominations(world, rt, user, &plan.nominators);
    let mut standard_ids = Vec::new();
    let mut standard_seen = HashSet::new();
    for id in lists.into_iter().flatten() {
        if !chosen.contains(&id) && standard_seen.insert(id) {
            standard_ids.push(id);
            if seen.insert(id) {
                considered.push(id);
            }
        }
    }
    let k_std = k - dedicated.len();
    let pool = candidates(world, &user_features, &standard_ids);
    let standard = rank_with_mask(&plan.policy, &pool, &mask(0..k_std), &mut rt.serve)?;

    let slate_features: Vec<FeatureRecord> = standard
        .iter()
        .chain(&dedicated)
        .map(|r| FeatureRecord::new(user_features.clone(), world.content_features(r.id)))
        .collect();
    let day = world.day();
    for (r, features) in standard.iter().chain(&dedicated).zip(slate_features) {
        let p = world.true_mean(user, r.id);
        let reward = u8::from(rt.reward.random::<f64>() < p);
        if reward == 1 && world.record_positive(user, r.id) {
            out.graduated.push(r.id);
        }
        out.records.push(InteractionRecord {
            day,
            request,
            user,
            content: r.id,
            reward,
            served_score: r.score,
            arm,
            features: Some(features),
        });
    }
    if world.config().record_candidates {
        out.traces.push(RequestTrace {
            request,
            day,
            user,
            arm,
            candidates: considered,
        });
    }
    Ok(())
}
