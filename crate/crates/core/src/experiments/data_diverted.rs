use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::run::learner_seed;
use super::{run_closed_loop, ArmSpec, DiversionMode, DiversionPlan, Learner, LearnerSpec, Scenario, UncertaintyProbe};
use crate::error::{Error, Result};
use crate::hashing::{substream, tag};
use crate::metrics::{ensemble_uncertainty, satisfied_series, CorrelationTable, MetricsConfig};
use crate::ranker::{Ensemble, Policy, PolicyKind, Scorer, TrainConfig};
use crate::representation::FeatureRecord;
use crate::sim::{run_day, ArmId, ArmPlan, InteractionRecord, WorldConfig, WorldState};

/// Models trained on each arm's log and how they are compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    /// Must be an ensemble; it is trained like an ensemble and served
    /// greedily on its mean.
    pub learner: LearnerSpec,
    /// Days of common greedy serving after training.
    pub days: u32,
    /// Fixed `(user, item)` pairs the matched-step uncertainty is averaged over.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_pairs() -> usize {
    2_000
}

/// Data-diverted test: users split between two collection policies, one
/// model trained per arm's log, both models then served by one policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataDivertedScenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seeds: Vec<u64>,
    pub world: WorldConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub plan: DiversionPlan,
    /// Collection arms.
    pub arms: Vec<ArmSpec>,
    pub control: ArmId,
    pub treatment: ArmId,
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Probe for the collection arms' uncertainty correlations.
    #[serde(default)]
    pub probe: UncertaintyProbe,
}

impl DataDivertedScenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Self = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plan.mode() != DiversionMode::UserOnly {
            return Err(Error::InvalidConfig("data-diverted tests divert users only".into()));
        }
        if self.control == self.treatment {
            return Err(Error::InvalidConfig("control and treatment must differ".into()));
        }
        let ev = &self.evaluation.learner;
        if ev.kind != PolicyKind::EnsembleTs || ev.ensemble_size < 2 {
            return Err(Error::InvalidConfig(
                "evaluation learner must be an ensemble of at least two members".into(),
            ));
        }
        ev.network.validate()?;
        if ev.network.user_dim != self.world.user_feature_dim() || ev.network.content_dim != self.world.content_feature_dim()
        {
            return Err(Error::InvalidConfig("evaluation network does not match world features".into()));
        }
        let sc = self.collection()?;
        for arm in [self.control, self.treatment] {
            if sc.arm(arm).is_none() {
                return Err(Error::InvalidConfig(format!("arm {arm} has no spec")));
            }
        }
        Ok(())
    }

    /// Closed-loop scenario for the collection phase.
    pub fn collection(&self) -> Result<Scenario> {
        let sc = Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            seeds: self.seeds.clone(),
            world: self.world.clone(),
            train: self.train.clone(),
            plan: self.plan.clone(),
            arms: self.arms.clone(),
            metrics: self.metrics.clone(),
            probe: self.probe,
            control: self.control,
            aa_bands: Vec::new(),
            ablation_sweep: None,
        };
        sc.validate()?;
        Ok(sc)
    }
}

/// One arm's side of a data-diverted run.
#[derive(Clone, Debug, PartialEq)]
pub struct DivertedArm {
    pub arm: ArmId,
    pub collection_policy: PolicyKind,
    pub evaluation_policy: PolicyKind,
    /// Records collected under the arm's own policy.
    pub collected: usize,
    /// Ensemble uncertainty on the fixed pairs after each matched step.
    pub uncertainty: Vec<f64>,
    /// Ensemble uncertainty over impressions of the evaluation phase.
    pub served_uncertainty: f64,
    /// Mean daily satisfied users during the evaluation phase.
    pub satisfied: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataDivertedReport {
    pub seed: u64,
    /// Records each model trained on at every step, equal for both arms.
    pub step_records: Vec<usize>,
    pub control: DivertedArm,
    pub treatment: DivertedArm,
    /// Uncertainty correlations of the exploring collection policies.
    pub correlations: Vec<CorrelationTable>,
}

impl DataDivertedReport {
    /// True when both models were served by the same kind of policy.
    pub fn single_evaluation_policy(&self) -> bool {
        self.control.evaluation_policy == self.treatment.evaluation_policy
    }

    pub fn final_uncertainty(&self) -> (f64, f64) {
        let last = |a: &DivertedArm| a.uncertainty.last().copied().unwrap_or(0.0);
        (last(&self.control), last(&self.treatment))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (c, t) = (&self.control, &self.treatment);
        let _ = writeln!(s, "step  records  uncertainty[{}]  uncertainty[{}]", c.arm, t.arm);
        for (i, n) in self.step_records.iter().enumerate() {
            let _ = writeln!(s, "{:>4}  {n:>7}  {:>15.6}  {:>15.6}", i + 1, c.uncertainty[i], t.uncertainty[i]);
        }
        for a in [c, t] {
            let _ = writeln!(
                s,
                "arm {}: collected {} under {:?}, served by {:?}: uncertainty {:.6}, satisfied {:.1}",
                a.arm, a.collected, a.collection_policy, a.evaluation_policy, a.served_uncertainty, a.satisfied
            );
        }
        for t in &self.correlations {
            s.push_str(&t.to_text());
        }
        s
    }
}

fn by_day(log: &[InteractionRecord], arm: ArmId, days: u32) -> Vec<Vec<(&FeatureRecord, f64)>> {
    let mut out = vec![Vec::new(); days as usize];
    for r in log.iter().filter(|r| r.arm == arm) {
        if let (Some(f), Some(slot)) = (r.features.as_ref(), out.get_mut(r.day as usize)) {
            slot.push((f, f64::from(r.reward)));
        }
    }
    out
}

/// Serves every user of a copy of `world` with `policy` for `days` days
/// without training. Returns the served records and mean daily satisfied users.
fn evaluate(
    world: &WorldState,
    spec: &ArmSpec,
    policy: Policy,
    days: u32,
    satisfied_threshold: u32,
) -> Result<(Vec<FeatureRecord>, f64)> {
    let mut world = world.clone();
    world.assign_users(|_| Some(ArmId(0)));
    let plan = ArmPlan::new(policy, spec.nominators.clone(), spec.slate_size);
    let plans: BTreeMap<ArmId, ArmPlan> = [(ArmId(0), plan)].into();
    let start = world.day();
    let mut log = Vec::new();
    for _ in 0..days {
        log.append(&mut run_day(&mut world, &plans)?.records);
    }
    let per_day = satisfied_series(&log, start + days, satisfied_threshold);
    let satisfied = per_day[start as usize..].iter().sum::<usize>() as f64 / f64::from(days.max(1));
    let served = log.into_iter().filter_map(|r| r.features).collect();
    Ok((served, satisfied))
}

/// Runs the three phases for one seed.
///
/// Collection serves both arms in one world with their own policies.
/// Training gives each arm a fresh ensemble with the same initialization and
/// feeds it that arm's log one day per step, truncated so both models see
/// the same number of records at every step. Evaluation serves each final
/// model greedily on its ensemble mean in identical copies of the final
/// world. Uncertainty at every step is averaged over one pair set drawn
/// equally from both evaluation logs, so the two curves share a yardstick.
pub fn run_data_diverted(sc: &DataDivertedScenario, seed: u64) -> Result<DataDivertedReport> {
    sc.validate()?;
    let collection = sc.collection()?;
    let out = run_closed_loop(&collection, seed, true)?;
    let correlations = out.correlation_tables(&collection)?;
    let days = sc.world.horizon_days;
    let arms = [sc.control, sc.treatment];
    let logs = arms.map(|a| by_day(&out.log, a, days));
    let ev_seed = learner_seed(seed, sc.evaluation.learner.network.init_seed);
    let mut models = [
        Learner::new(&sc.evaluation.learner, ev_seed)?,
        Learner::new(&sc.evaluation.learner, ev_seed)?,
    ];
    let mut checkpoints: [Vec<Ensemble>; 2] = [Vec::new(), Vec::new()];
    let mut step_records = Vec::new();
    for d in 0..days as usize {
        let n = logs[0][d].len().min(logs[1][d].len());
        step_records.push(n);
        for i in 0..2 {
            if n > 0 {
                models[i].train(&logs[i][d][..n], &sc.train)?;
            }
            checkpoints[i].push(models[i].ensemble()?.clone());
        }
    }
    drop(logs);

    let spec = collection.arm(sc.control).expect("validated");
    let mut served = Vec::new();
    let mut satisfied = Vec::new();
    let mut kinds = Vec::new();
    for model in &models {
        let policy = Policy::Greedy(Scorer::EnsembleMean(Arc::new(model.ensemble()?.clone())));
        kinds.push(policy.kind());
        let (recs, sat) = evaluate(&out.world, spec, policy, sc.evaluation.days, sc.metrics.satisfied_threshold)?;
        served.push(recs);
        satisfied.push(sat);
    }
    let mut rng = substream(seed, &[tag::EVAL]);
    let mut pairs = Vec::with_capacity(sc.evaluation.pairs);
    for i in 0..sc.evaluation.pairs {
        let pool = &served[i % 2];
        if !pool.is_empty() {
            pairs.push(pool[rng.random_range(0..pool.len())].clone());
        }
    }

    let mut sides = Vec::new();
    for i in 0..2 {
        let uncertainty = checkpoints[i]
            .iter()
            .map(|e| ensemble_uncertainty(e, &pairs))
            .collect::<Result<Vec<_>>>()?;
        sides.push(DivertedArm {
            arm: arms[i],
            collection_policy: out.learners[&arms[i]].kind(),
            evaluation_policy: kinds[i],
            collected: out.log.iter().filter(|r| r.arm == arms[i]).count(),
            uncertainty,
            served_uncertainty: ensemble_uncertainty(models[i].ensemble()?, &served[i])?,
            satisfied: satisfied[i],
        });
    }
    let treatment = sides.pop().expect("two arms");
    let control = sides.pop().expect("two arms");
    let report = DataDivertedReport {
        seed,
        step_records,
        control,
        treatment,
        correlations,
    };
    if !report.single_evaluation_policy() {
        return Err(Error::InvalidConfig("evaluation served the two models with different policies".into()));
    }
    Ok(report)
}
