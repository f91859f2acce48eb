use serde::{Deserialize, Serialize};

use super::{run_closed_loop, AblationSpec, DiversionPlan, Scenario};
use crate::error::{Error, Result};
use crate::metrics::satisfied_series;

/// Corpus-ablation study: the control arm rerun alone at several fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSweep {
    pub fractions: Vec<f64>,
    pub salt: String,
    /// Satisfied users are averaged over this many final days.
    #[serde(default = "default_tail_days")]
    pub tail_days: u32,
}

fn default_tail_days() -> u32 {
    7
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationPoint {
    pub fraction: f64,
    /// Mean daily satisfied users over the final `tail_days` days.
    pub satisfied: f64,
    pub impressions: usize,
    pub positives: usize,
    /// Satisfied users per day.
    pub series: Vec<usize>,
}

/// Runs the control arm with every user in it once per fraction. All runs
/// share the seed, so they see the same users, corpus and traffic.
pub fn run_ablation_sweep(sc: &Scenario, sweep: &AblationSweep, seed: u64) -> Result<Vec<AblationPoint>> {
    let mut spec = sc
        .arm(sc.control)
        .ok_or_else(|| Error::InvalidConfig(format!("control arm {} has no spec", sc.control)))?
        .clone();
    let horizon = sc.world.horizon_days;
    let tail = sweep.tail_days.clamp(1, horizon.max(1));
    let mut base = sc.clone();
    base.plan = DiversionPlan::user_only(sc.plan.salt(), &[(sc.control, 1.0)])?;
    let mut out = Vec::with_capacity(sweep.fractions.len());
    for &x in &sweep.fractions {
        spec.ablation = Some(AblationSpec::new(x, sweep.salt.clone())?);
        base.arms = vec![spec.clone()];
        let run = run_closed_loop(&base, seed, false)?;
        let series = satisfied_series(&run.log, horizon, sc.metrics.satisfied_threshold);
        let satisfied = series[horizon.saturating_sub(tail) as usize..].iter().sum::<usize>() as f64 / f64::from(tail);
        out.push(AblationPoint {
            fraction: x,
            satisfied,
            impressions: run.log.len(),
            positives: run.log.iter().filter(|r| r.is_positive()).count(),
            series,
        });
    }
    Ok(out)
}
