use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::world::WorldState;
use super::{ArmId, ContentId, UserId};

/// First-stage candidate generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NominatorSpec {
    /// Most lifetime positives as of the start of the day.
    ///
    /// Every kind skips items the user has already completed.
    Popularity { n: usize },
    /// Highest `consumption_mean . topic + noise * z`, `z` standard normal per item and request.
    Similarity { n: usize, noise: f64 },
    /// Uniform sample of ungraduated items that are fresh or tail.
    FreshTail { n: usize },
}

impl NominatorSpec {
    pub fn n(&self) -> usize {
        match *self {
            NominatorSpec::Popularity { n } | NominatorSpec::Similarity { n, .. } | NominatorSpec::FreshTail { n } => n,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        match self {
            NominatorSpec::Popularity { .. } => NominatorSpec::Popularity { n },
            NominatorSpec::Similarity { noise, .. } => NominatorSpec::Similarity { n, noise },
            NominatorSpec::FreshTail { .. } => NominatorSpec::FreshTail { n },
        }
    }
}

/// One arm's view of the corpus, built at the start of a day.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusIndex {
    /// Every item the arm may serve today, by id.
    pub visible: Vec<ContentId>,
    /// `visible` by lifetime positives descending, ties by id.
    pub popular: Vec<ContentId>,
    /// Ungraduated items with age below the fresh cutoff or positives below
    /// the tail cutoff.
    pub fresh_tail: Vec<ContentId>,
}

impl CorpusIndex {
    pub fn build(world: &WorldState, arm: ArmId) -> Self {
        let cfg = world.config();
        let day = world.day();
        let visible: Vec<ContentId> = world
            .items()
            .iter()
            .filter(|it| world.visible(arm, it))
            .map(|it| it.id)
            .collect();
        let mut popular = visible.clone();
        popular.sort_by(|a, b| {
            world
                .item(*b)
                .lifetime_positives
                .cmp(&world.item(*a).lifetime_positives)
                .then(a.cmp(b))
        });
        let fresh_tail = visible
            .iter()
            .copied()
            .filter(|&id| {
                let it = world.item(id);
                !it.is_graduated() && (it.age(day) < cfg.fresh_age_days || it.lifetime_positives < cfg.tail_positives)
            })
            .collect();
        Self {
            visible,
            popular,
            fresh_tail,
        }
    }
}

/// Candidates from one nominator; fewer than `n` when fewer are eligible.
pub fn nominate<R: Rng + ?Sized>(
    world: &WorldState,
    index: &CorpusIndex,
    user: UserId,
    spec: &NominatorSpec,
    rng: &mut R,
) -> Vec<ContentId> {
    match *spec {
        NominatorSpec::Popularity { n } => {
            let consumed = &world.user(user).consumed;
            index.popular.iter().filter(|id| !consumed.contains(id)).take(n).copied().collect()
        }
        NominatorSpec::Similarity { n, noise } => similarity(world, index, user, n, noise, rng),
        NominatorSpec::FreshTail { n } => fresh_tail(world, index, user, n, rng),
    }
}

/// One candidate list per nominator, in spec order.
pub fn nominate_with<R: Rng + ?Sized>(
    world: &WorldState,
    index: &CorpusIndex,
    user: UserId,
    specs: &[NominatorSpec],
    rng: &mut R,
) -> Vec<Vec<ContentId>> {
    specs.iter().map(|s| nominate(world, index, user, s, rng)).collect()
}

fn similarity<R: Rng + ?Sized>(
    world: &WorldState,
    index: &CorpusIndex,
    user: UserId,
    n: usize,
    noise: f64,
    rng: &mut R,
) -> Vec<ContentId> {
    if n == 0 || index.visible.is_empty() {
        return Vec::new();
    }
    let profile = world.user(user);
    let mean = profile.consumption_mean();
    let mut scored: Vec<(f64, ContentId)> = index
        .visible
        .iter()
        .filter(|id| !profile.consumed.contains(id))
        .map(|&id| {
            let topic = &world.item(id).latent_topic;
            let mut s: f64 = mean.iter().zip(topic).map(|(a, b)| a * b).sum();
            if noise > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                s += noise * z;
            }
            (s, id)
        })
        .collect();
    let by = |a: &(f64, ContentId), b: &(f64, ContentId)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if scored.is_empty() {
        return Vec::new();
    }
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, by);
        scored.truncate(n);
    }
    scored.sort_by(by);
    scored.into_iter().map(|(_, id)| id).collect()
}

fn fresh_tail<R: Rng + ?Sized>(
    world: &WorldState,
    index: &CorpusIndex,
    user: UserId,
    n: usize,
    rng: &mut R,
) -> Vec<ContentId> {
    let pool = &index.fresh_tail;
    if n == 0 || pool.is_empty() {
        return Vec::new();
    }
    // items may graduate or be consumed during the day; oversample and drop them
    let consumed = &world.user(user).consumed;
    let draw = (2 * n).min(pool.len());
    index::sample(rng, pool.len(), draw)
        .into_iter()
        .map(|i| pool[i])
        .filter(|&id| !world.item(id).is_graduated() && !consumed.contains(&id))
        .take(n)
        .collect()
}
