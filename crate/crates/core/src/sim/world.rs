use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ArmId, ContentId, ProviderId, UserId};
use crate::error::{Error, Result};
use crate::hashing::{substream, tag};
use crate::representation::{sigmoid, FeatureRecord};

/// Content features are `[ln(1+age)/AGE_SCALE, ln(1+positives)/POP_SCALE, topic...]`.
const AGE_SCALE: f64 = 4.0;
const POP_SCALE: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_users: usize,
    pub initial_corpus: usize,
    /// New items injected at the end of every day.
    pub daily_new_content: usize,
    pub latent_dim: usize,
    /// Latent vectors are `N(0, latent_scale^2 / k * I)`, so `E|v|^2 = latent_scale^2`.
    pub latent_scale: f64,
    pub quality_mean: f64,
    pub quality_sd: f64,
    pub reward_bias: f64,
    /// Std of the fixed noise added to latents before the ranker sees them.
    pub observation_noise: f64,
    /// Lifetime positives at which an item graduates.
    pub graduation_threshold: u64,
    /// Items younger than this many days are fresh.
    pub fresh_age_days: u32,
    /// Items with fewer lifetime positives than this are tail.
    pub tail_positives: u64,
    /// Expected requests per user-day are `LogNormal(activity_log_mean, activity_log_sd)`.
    pub activity_log_mean: f64,
    pub activity_log_sd: f64,
    pub n_providers: usize,
    pub horizon_days: u32,
    pub seed: u64,
    /// Keep each request's candidate ids for regret accounting.
    pub record_candidates: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_users: 10_000,
            initial_corpus: 1_000,
            daily_new_content: 40,
            latent_dim: 8,
            latent_scale: 1.5,
            quality_mean: -1.0,
            quality_sd: 1.0,
            reward_bias: -1.0,
            observation_noise: 0.3,
            graduation_threshold: 5,
            fresh_age_days: 3,
            tail_positives: 5,
            activity_log_mean: -1.0,
            activity_log_sd: 0.7,
            n_providers: 500,
            horizon_days: 90,
            seed: 0,
            record_candidates: false,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.n_providers == 0 {
            return bad("n_providers must be positive");
        }
        if self.graduation_threshold == 0 {
            return bad("graduation_threshold must be positive");
        }
        for (name, v) in [
            ("latent_scale", self.latent_scale),
            ("quality_sd", self.quality_sd),
            ("observation_noise", self.observation_noise),
            ("activity_log_sd", self.activity_log_sd),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and nonnegative")));
            }
        }
        if !self.quality_mean.is_finite() || !self.reward_bias.is_finite() || !self.activity_log_mean.is_finite() {
            return bad("quality_mean, reward_bias and activity_log_mean must be finite");
        }
        Ok(())
    }

    pub fn user_feature_dim(&self) -> usize {
        self.latent_dim + 1
    }

    pub fn content_feature_dim(&self) -> usize {
        self.latent_dim + 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub id: UserId,
    pub latent_pref: Vec<f64>,
    pub observed_pref: Vec<f64>,
    /// Expected requests per day.
    pub activity: f64,
    pub arm_tag: Option<ArmId>,
    /// Sum of latent topics of positively rewarded items.
    pub consumption_sum: Vec<f64>,
    pub consumption_count: u64,
    /// Items the user has completed; nominators do not offer them again.
    pub consumed: HashSet<ContentId>,
}

impl UserProfile {
    /// Running mean of consumed topics; zero before the first positive.
    pub fn consumption_mean(&self) -> Vec<f64> {
        if self.consumption_count == 0 {
            return vec![0.0; self.consumption_sum.len()];
        }
        let n = self.consumption_count as f64;
        self.consumption_sum.iter().map(|s| s / n).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentItem {
    pub id: ContentId,
    pub provider_id: ProviderId,
    pub publish_day: u32,
    pub latent_topic: Vec<f64>,
    pub observed_topic: Vec<f64>,
    pub quality: f64,
    pub lifetime_positives: u64,
    pub graduation_day: Option<u32>,
    pub arm_tag: Option<ArmId>,
}

impl ContentItem {
    pub fn age(&self, day: u32) -> u32 {
        day.saturating_sub(self.publish_day)
    }

    pub fn is_graduated(&self) -> bool {
        self.graduation_day.is_some()
    }
}

/// Which corpus a request may draw from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorpusMode {
    /// Every arm sees every item.
    Shared,
    /// Items belong to the arm of their provider; index = provider id.
    Diverted(Vec<Option<ArmId>>),
}

#[derive(Clone, Debug)]
pub struct WorldState {
    config: WorldConfig,
    day: u32,
    next_request: u64,
    users: Vec<UserProfile>,
    items: Vec<ContentItem>,
    corpus_mode: CorpusMode,
}

fn latent<R: Rng + ?Sized>(k: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let sd = scale / (k as f64).sqrt();
    (0..k)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn observe<R: Rng + ?Sized>(v: &[f64], noise: f64, rng: &mut R) -> Vec<f64> {
    v.iter()
        .map(|x| x + noise * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Success probability of one impression.
pub fn true_mean_reward(latent_pref: &[f64], latent_topic: &[f64], quality: f64, bias: f64) -> f64 {
    let affinity: f64 = latent_pref.iter().zip(latent_topic).map(|(a, b)| a * b).sum();
    sigmoid(affinity + quality + bias)
}

pub fn build_world(config: WorldConfig) -> Result<WorldState> {
    config.validate()?;
    let mut rng = substream(config.seed, &[tag::WORLD]);
    let k = config.latent_dim;
    let activity = LogNormal::new(config.activity_log_mean, config.activity_log_sd)
        .map_err(|e| Error::InvalidConfig(format!("activity distribution: {e}")))?;
    let users = (0..config.n_users)
        .map(|i| {
            let latent_pref = latent(k, config.latent_scale, &mut rng);
            let observed_pref = observe(&latent_pref, config.observation_noise, &mut rng);
            UserProfile {
                id: UserId(i as u32),
                latent_pref,
                observed_pref,
                activity: activity.sample(&mut rng),
                arm_tag: None,
                consumption_sum: vec![0.0; k],
                consumption_count: 0,
                consumed: HashSet::new(),
            }
        })
        .collect();
    let mut world = WorldState {
        config,
        day: 0,
        next_request: 0,
        users,
        items: Vec::new(),
        corpus_mode: CorpusMode::Shared,
    };
    let n = world.config.initial_corpus;
    world.inject(n, 0, &mut rng)?;
    Ok(world)
}

impl WorldState {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// Current day; requests served now are stamped with it.
    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn items(&self) -> &[ContentItem] {
        &self.items
    }

    pub fn user(&self, id: UserId) -> &UserProfile {
        &self.users[id.index()]
    }

    pub fn item(&self, id: ContentId) -> &ContentItem {
        &self.items[id.index()]
    }

    pub fn corpus_mode(&self) -> &CorpusMode {
        &self.corpus_mode
    }

    pub fn assign_users(&mut self, mut arm_of: impl FnMut(UserId) -> Option<ArmId>) {
        for u in &mut self.users {
            u.arm_tag = arm_of(u.id);
        }
    }

    /// Restricts every arm to the items of its providers, now and for
    /// items injected later.
    pub fn divert_corpus(&mut self, provider_arms: Vec<Option<ArmId>>) -> Result<()> {
        if provider_arms.len() != self.config.n_providers {
            return Err(Error::InvalidConfig(format!(
                "{} provider arms for {} providers",
                provider_arms.len(),
                self.config.n_providers
            )));
        }
        for item in &mut self.items {
            item.arm_tag = provider_arms[item.provider_id.0 as usize];
        }
        self.corpus_mode = CorpusMode::Diverted(provider_arms);
        Ok(())
    }

    /// Whether a request from `arm` may see `item` today.
    pub fn visible(&self, arm: ArmId, item: &ContentItem) -> bool {
        if item.publish_day > self.day {
            return false;
        }
        match self.corpus_mode {
            CorpusMode::Shared => true,
            CorpusMode::Diverted(_) => item.arm_tag == Some(arm),
        }
    }

    pub fn true_mean(&self, user: UserId, content: ContentId) -> f64 {
        let u = self.user(user);
        let c = self.item(content);
        true_mean_reward(&u.latent_pref, &c.latent_topic, c.quality, self.config.reward_bias)
    }

    pub fn user_features(&self, user: UserId) -> Vec<f64> {
        let u = self.user(user);
        let mut f = Vec::with_capacity(self.config.user_feature_dim());
        f.push(u.activity.ln_1p());
        f.extend_from_slice(&u.observed_pref);
        f
    }

    pub fn content_features(&self, content: ContentId) -> Vec<f64> {
        let c = self.item(content);
        let mut f = Vec::with_capacity(self.config.content_feature_dim());
        f.push(f64::from(c.age(self.day)).ln_1p() / AGE_SCALE);
        f.push((c.lifetime_positives as f64).ln_1p() / POP_SCALE);
        f.extend_from_slice(&c.observed_topic);
        f
    }

    pub fn features(&self, user: UserId, content: ContentId) -> FeatureRecord {
        FeatureRecord::new(self.user_features(user), self.content_features(content))
    }

    pub(crate) fn next_request_id(&mut self) -> u64 {
        let r = self.next_request;
        self.next_request += 1;
        r
    }

    /// Records one positive on `content`, graduating it on the first
    /// crossing of the threshold. Returns true on graduation.
    pub(crate) fn record_positive(&mut self, user: UserId, content: ContentId) -> bool {
        let day = self.day;
        let threshold = self.config.graduation_threshold;
        let item = &mut self.items[content.index()];
        item.lifetime_positives += 1;
        let graduated = item.graduation_day.is_none() && item.lifetime_positives >= threshold;
        if graduated {
            item.graduation_day = Some(day);
        }
        let topic = &self.items[content.index()].latent_topic;
        let u = &mut self.users[user.index()];
        for (s, t) in u.consumption_sum.iter_mut().zip(topic) {
            *s += t;
        }
        u.consumption_count += 1;
        u.consumed.insert(content);
        graduated
    }

    /// Injects the day's new items and advances the clock.
    pub(crate) fn end_day(&mut self) -> Result<Vec<ContentId>> {
        let mut rng = substream(self.config.seed, &[tag::INJECT, u64::from(self.day)]);
        let first = self.items.len();
        let n = self.config.daily_new_content;
        self.inject(n, self.day + 1, &mut rng)?;
        self.day += 1;
        Ok((first..self.items.len()).map(|i| ContentId(i as u32)).collect())
    }

    fn inject<R: Rng + ?Sized>(&mut self, n: usize, publish_day: u32, rng: &mut R) -> Result<()> {
        let cfg = &self.config;
        let quality = Normal::new(cfg.quality_mean, cfg.quality_sd)
            .map_err(|e| Error::InvalidConfig(format!("quality distribution: {e}")))?;
        for _ in 0..n {
            let id = ContentId(
                u32::try_from(self.items.len()).map_err(|_| Error::InvalidConfig("corpus exceeds u32 ids".into()))?,
            );
            let provider_id = ProviderId(rng.random_range(0..cfg.n_providers as u32));
            let latent_topic = latent(cfg.latent_dim, cfg.latent_scale, rng);
            let observed_topic = observe(&latent_topic, cfg.observation_noise, rng);
            let arm_tag = match &self.corpus_mode {
                CorpusMode::Shared => None,
                CorpusMode::Diverted(map) => map[provider_id.0 as usize],
            };
            self.items.push(ContentItem {
                id,
                provider_id,
                publish_day,
                latent_topic,
                observed_topic,
                quality: quality.sample(rng),
                lifetime_positives: 0,
                graduation_day: None,
                arm_tag,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldConfig {
        WorldConfig {
            n_users: 50,
            initial_corpus: 30,
            daily_new_content: 4,
            n_providers: 7,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = build_world(small()).unwrap();
        let b = build_world(small()).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.items, b.items);
        let c = build_world(WorldConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.items, c.items);
    }

    #[test]
    fn empty_population_is_valid() {
        let w = build_world(WorldConfig { n_users: 0, ..small() }).unwrap();
        assert!(w.users().is_empty());
        assert_eq!(w.items().len(), 30);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(true_mean_reward(&[1.0, 0.0], &[0.0, 1.0], 0.0, 0.0), 0.5);
        let p = true_mean_reward(&[1.0, 0.0], &[1.0, 0.0], 1.0, 0.0);
        assert!((p - 0.880_797_077_977_882_3).abs() < 1e-15);
        let lo = true_mean_reward(&[0.3, 0.2], &[0.1, -0.4], -0.5, 0.1);
        let hi = true_mean_reward(&[0.3, 0.2], &[0.1, -0.4], 0.5, 0.1);
        assert!(lo < hi);
    }

    #[test]
    fn graduation_is_set_once() {
        let mut w = build_world(WorldConfig {
            graduation_threshold: 2,
            ..small()
        })
        .unwrap();
        let (u, c) = (UserId(0), ContentId(3));
        assert!(!w.record_positive(u, c));
        assert!(w.record_positive(u, c));
        w.end_day().unwrap();
        assert!(!w.record_positive(u, c));
        assert_eq!(w.item(c).graduation_day, Some(0));
        assert_eq!(w.item(c).lifetime_positives, 3);
        assert_eq!(w.user(u).consumption_count, 3);
    }

    #[test]
    fn injection_publishes_tomorrow_and_follows_diversion() {
        let mut w = build_world(small()).unwrap();
        let arms: Vec<_> = (0..7).map(|p| (p % 2 == 0).then_some(ArmId(p as u16 % 3))).collect();
        w.divert_corpus(arms.clone()).unwrap();
        let new = w.end_day().unwrap();
        assert_eq!(new.len(), 4);
        for id in new {
            let it = w.item(id);
            assert_eq!(it.publish_day, 1);
            assert_eq!(it.arm_tag, arms[it.provider_id.0 as usize]);
        }
        assert!(w.divert_corpus(vec![None; 3]).is_err());
    }

    #[test]
    fn feature_shapes() {
        let w = build_world(small()).unwrap();
        let rec = w.features(UserId(1), ContentId(2));
        assert_eq!(rec.user.len(), w.config().user_feature_dim());
        assert_eq!(rec.content.len(), w.config().content_feature_dim());
        assert_eq!(rec.content[0], 0.0);
    }
}
