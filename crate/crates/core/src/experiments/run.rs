use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{assign_corpus, assign_user, AaBand, Learner, ProbeSource, Scenario};
use crate::error::{Error, Result};
use crate::hashing::{hash_words, substream, tag};
use crate::metrics::{build_report, uncertainty_feature_correlations, CorrelationTable, MetricsReport, UncertaintySample};
use crate::ranker::PolicyKind;
use crate::representation::FeatureRecord;
use crate::sim::{
    build_world, nominate_with, run_day, ArmId, ArmPlan, ContentId, CorpusIndex, CorpusRow, InteractionRecord, ProviderId, RequestTrace, UserId,
    WorldState,
};

/// Everything a closed-loop run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub seed: u64,
    /// Impressions in serving order. Features are kept only when requested.
    pub log: Vec<InteractionRecord>,
    pub traces: Vec<RequestTrace>,
    pub learners: BTreeMap<ArmId, Learner>,
    /// World state after the last day.
    pub world: WorldState,
}

/// Network seed shared by every arm with the same spec, so arms differ only
/// by treatment.
pub(crate) fn learner_seed(seed: u64, init_seed: u64) -> u64 {
    hash_words(&[seed, tag::TRAIN, init_seed])
}

/// Builds the world for `seed` and applies the scenario's diversion.
pub fn prepare_world(sc: &Scenario, seed: u64) -> Result<WorldState> {
    let mut cfg = sc.world.clone();
    cfg.seed = seed;
    let mut world = build_world(cfg)?;
    world.assign_users(|u| assign_user(u, &sc.plan));
    if sc.is_codiverted() {
        let arms = (0..world.config().n_providers as u32)
            .map(|p| assign_corpus(ProviderId(p), &sc.plan))
            .collect::<Result<Vec<_>>>()?;
        world.divert_corpus(arms)?;
    }
    Ok(world)
}

/// Serves `sc.world.horizon_days` days. After each day every arm trains one
/// run on its own records of that day, and only those.
pub fn run_closed_loop(sc: &Scenario, seed: u64, retain_features: bool) -> Result<RunOutput> {
    sc.validate()?;
    let mut world = prepare_world(sc, seed)?;
    let mut learners = BTreeMap::new();
    for a in &sc.arms {
        let s = learner_seed(seed, a.learner.network.init_seed);
        learners.insert(a.arm, Learner::new(&a.learner, s)?);
    }
    let mut log = Vec::new();
    let mut traces = Vec::new();
    for _ in 0..sc.world.horizon_days {
        let plans: BTreeMap<ArmId, ArmPlan> = sc
            .arms
            .iter()
            .map(|a| {
                let plan = ArmPlan {
                    policy: learners[&a.arm].policy(),
                    nominators: a.nominators.clone(),
                    slate_size: a.slate_size,
                    dedicated: a.dedicated,
                    ablation: a.ablation.clone(),
                    explore_mask: a.explore_mask.clone(),
                };
                (a.arm, plan)
            })
            .collect();
        let mut outcome = run_day(&mut world, &plans)?;
        for (arm, learner) in learners.iter_mut() {
            let examples: Vec<(&FeatureRecord, f64)> = outcome
                .records
                .iter()
                .filter(|r| r.arm == *arm)
                .filter_map(|r| r.features.as_ref().map(|f| (f, f64::from(r.reward))))
                .collect();
            learner.train(&examples, &sc.train)?;
        }
        if !retain_features {
            for r in &mut outcome.records {
                r.features = None;
            }
        }
        log.append(&mut outcome.records);
        traces.append(&mut outcome.traces);
    }
    Ok(RunOutput {
        seed,
        log,
        traces,
        learners,
        world,
    })
}

/// Closed-loop run that requires users and corpus to be codiverted.
pub fn run_codiverted(sc: &Scenario, seed: u64) -> Result<RunOutput> {
    if !sc.is_codiverted() {
        return Err(Error::NotCoDiverted);
    }
    run_closed_loop(sc, seed, false)
}

impl RunOutput {
    pub fn corpus(&self) -> Vec<CorpusRow> {
        self.world.items().iter().map(CorpusRow::from).collect()
    }

    /// Metrics over the run, with uncertainty correlations for every arm
    /// whose policy has a notion of uncertainty.
    pub fn report(&self, sc: &Scenario) -> Result<MetricsReport> {
        let world = &self.world;
        let truth = |u: UserId, c: ContentId| world.true_mean(u, c);
        let mut report = build_report(
            &self.log,
            &self.corpus(),
            &self.traces,
            Some(&truth),
            world.config().graduation_threshold,
            sc.world.horizon_days,
            &sc.metrics,
        );
        report.correlations = self.correlation_tables(sc)?;
        Ok(report)
    }

    /// `(user, item)` of the arm's impressions over the last `days` days.
    fn recent_impressions(&self, arm: ArmId, days: u32) -> Vec<(UserId, ContentId)> {
        let since = self.world.day().saturating_sub(days);
        self.log
            .iter()
            .filter(|r| r.arm == arm && r.day >= since)
            .map(|r| (r.user, r.content))
            .collect()
    }

    /// Uncertainty-versus-feature correlations for every arm whose policy has
    /// a notion of uncertainty.
    pub fn correlation_tables(&self, sc: &Scenario) -> Result<Vec<CorrelationTable>> {
        let probe = &sc.probe;
        let mut out = Vec::new();
        for (&arm, learner) in &self.learners {
            if learner.kind() == PolicyKind::Greedy {
                continue;
            }
            let samples = self.uncertainty_samples(sc, arm)?;
            out.push(CorrelationTable {
                arm,
                label: label(learner.kind()).into(),
                rows: uncertainty_feature_correlations(&samples, probe.resamples, self.seed),
            });
        }
        Ok(out)
    }

    /// `(user, item)` pairs from one arm at the end of the run, with the
    /// arm's final uncertainty and the features it is compared against.
    /// User activity is the user's impression count in the log.
    pub fn uncertainty_samples(&self, sc: &Scenario, arm: ArmId) -> Result<Vec<UncertaintySample>> {
        let probe = &sc.probe;
        let world = &self.world;
        let learner = self
            .learners
            .get(&arm)
            .ok_or_else(|| Error::InvalidConfig(format!("no learner for arm {arm}")))?;
        let policy = learner.policy();
        let mut activity: HashMap<UserId, u64> = HashMap::new();
        for r in self.log.iter().filter(|r| r.arm == arm) {
            *activity.entry(r.user).or_insert(0) += 1;
        }
        let mut rng = substream(self.seed, &[tag::EVAL, u64::from(arm.0)]);
        let pairs: Vec<(UserId, ContentId)> = match probe.source {
            ProbeSource::Corpus => {
                let users: Vec<UserId> = world
                    .users()
                    .iter()
                    .filter(|u| u.arm_tag == Some(arm))
                    .map(|u| u.id)
                    .collect();
                let items: Vec<ContentId> = world
                    .items()
                    .iter()
                    .filter(|it| world.visible(arm, it))
                    .map(|it| it.id)
                    .collect();
                if users.is_empty() || items.is_empty() {
                    return Ok(Vec::new());
                }
                (0..probe.pairs)
                    .map(|_| {
                        let u = users[rng.random_range(0..users.len())];
                        (u, items[rng.random_range(0..items.len())])
                    })
                    .collect()
            }
            ProbeSource::Impressions { days } => {
                let served = self.recent_impressions(arm, days);
                if served.is_empty() {
                    return Ok(Vec::new());
                }
                (0..probe.pairs)
                    .map(|_| {
                        let u = served[rng.random_range(0..served.len())].0;
                        (u, served[rng.random_range(0..served.len())].1)
                    })
                    .collect()
            }
            ProbeSource::Candidates { days } => {
                let spec = sc
                    .arm(arm)
                    .ok_or_else(|| Error::InvalidConfig(format!("arm {arm} has no spec")))?;
                let served = self.recent_impressions(arm, days);
                if served.is_empty() {
                    return Ok(Vec::new());
                }
                let index = CorpusIndex::build(world, arm);
                let mut pairs = Vec::with_capacity(probe.pairs);
                for _ in 0..probe.pairs.saturating_mul(4) {
                    if pairs.len() == probe.pairs {
                        break;
                    }
                    let u = served[rng.random_range(0..served.len())].0;
                    let pool: Vec<ContentId> = nominate_with(world, &index, u, &spec.nominators, &mut rng)
                        .into_iter()
                        .flatten()
                        .collect();
                    if !pool.is_empty() {
                        let c = pool[rng.random_range(0..pool.len())];
                        pairs.push((served[rng.random_range(0..served.len())].0, c));
                    }
                }
                pairs
            }
        };
        pairs
            .into_iter()
            .map(|(u, c)| {
                let item = world.item(c);
                Ok(UncertaintySample {
                    variance: policy.uncertainty(&world.features(u, c))?,
                    content_age: f64::from(item.age(world.day())),
                    popularity: item.lifetime_positives as f64,
                    user_activity: activity.get(&u).copied().unwrap_or(0) as f64,
                })
            })
            .collect()
    }
}

fn label(kind: PolicyKind) -> &'static str {
    match kind {
        PolicyKind::Greedy => "greedy",
        PolicyKind::NeuralLinearTs => "neural_linear",
        PolicyKind::EnsembleTs => "ensemble",
    }
}

/// `(treatment - control) / max(control, 1)` of discoverable corpus at the
/// horizon for threshold `x`.
pub fn discoverable_lift(report: &MetricsReport, control: ArmId, treatment: ArmId, x: u64) -> Option<f64> {
    let c = report.arm(control)?.discoverable_at_end(x)? as f64;
    let t = report.arm(treatment)?.discoverable_at_end(x)? as f64;
    Some((t - c) / c.max(1.0))
}

/// Noise band of one A/A lift series: mean +- 3 sample standard deviations.
pub fn aa_band(threshold: u64, lifts: &[f64]) -> AaBand {
    let n = lifts.len() as f64;
    let mean = lifts.iter().sum::<f64>() / n.max(1.0);
    let var = lifts.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    AaBand {
        threshold,
        lower: mean - 3.0 * sd,
        upper: mean + 3.0 * sd,
        seeds: lifts.len(),
    }
}

/// A/A lift of the first treatment arm at every metric threshold, for one seed.
pub fn aa_lifts(sc: &Scenario, seed: u64) -> Result<Vec<(u64, f64)>> {
    let aa = sc.aa_variant()?;
    let t = aa
        .treatments()
        .next()
        .ok_or_else(|| Error::InvalidConfig("A/A calibration needs a treatment arm".into()))?;
    let report = run_closed_loop(&aa, seed, false)?.report(&aa)?;
    Ok(aa
        .metrics
        .thresholds
        .iter()
        .filter_map(|&x| discoverable_lift(&report, aa.control, t, x).map(|l| (x, l)))
        .collect())
}
