//! Experiment designs: hash-based arm assignment, corpus ablation and the
//! scenario drivers built on the simulator.

mod ablation;
mod data_diverted;
mod diversion;
mod learner;
mod regret;
mod run;
mod scenario;
mod sweep;

pub use ablation::{ablate_nominations, AblationSpec};
pub use data_diverted::{run_data_diverted, DataDivertedReport, DataDivertedScenario, DivertedArm, EvaluationSpec};
pub use diversion::{assign_corpus, assign_user, ArmSplit, DiversionMode, DiversionPlan};
pub use learner::{Learner, LearnerSpec};
pub use regret::{run_linear_bandit, BanditAlgorithm, LinearBanditConfig, RegretTrace};
pub use run::{aa_band, aa_lifts, discoverable_lift, prepare_world, run_closed_loop, run_codiverted, RunOutput};
pub use scenario::{AaBand, ArmSpec, ProbeSource, Scenario, UncertaintyProbe};
pub use sweep::{run_ablation_sweep, AblationPoint, AblationSweep};
