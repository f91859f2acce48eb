//! Synthetic closed-loop recommendation world.
//!
//! Users carry latent preferences, items carry latent topics and a hidden
//! quality, and completion feedback is Bernoulli with success probability
//! `sigmoid(pref . topic + quality + bias)`. Each simulated day every user
//! issues a Poisson number of requests; each request runs its arm's
//! nominators, ranks the union, serves the slate and records the feedback.

mod day;
pub mod log_io;
mod nominator;
mod world;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use day::{run_day, ArmPlan, DayOutcome, DedicatedSlots, InteractionRecord, RequestTrace};
pub use nominator::{nominate, nominate_with, CorpusIndex, NominatorSpec};
pub use log_io::CorpusRow;
pub use world::{build_world, true_mean_reward, ContentItem, CorpusMode, UserProfile, WorldConfig, WorldState};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident($inner:ty)) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(UserId(u32));
id_type!(ContentId(u32));
id_type!(ProviderId(u32));
id_type!(
    /// Experiment arm. Arm 0 is the control by convention.
    ArmId(u16)
);

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ContentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
