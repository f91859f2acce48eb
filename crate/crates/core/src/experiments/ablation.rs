use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{hash_words, salted_hash, unit_interval};
use crate::sim::{ContentId, UserId};

/// Per-user random removal of a fraction of first-stage nominations.
///
/// Each nominator is asked for `ceil(n / (1 - x))` items, then every item
/// whose hash under the user's seed falls below `x` is dropped. A user keeps
/// the same seed across requests and days, so a given item is consistently
/// hidden from that user while staying visible to others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAblation")]
pub struct AblationSpec {
    fraction: f64,
    salt: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAblation {
    fraction: f64,
    salt: String,
}

impl TryFrom<RawAblation> for AblationSpec {
    type Error = Error;

    fn try_from(raw: RawAblation) -> Result<Self> {
        Self::new(raw.fraction, raw.salt)
    }
}

impl AblationSpec {
    pub fn new(fraction: f64, salt: impl Into<String>) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::AblationFraction(fraction));
        }
        Ok(Self {
            fraction,
            salt: salt.into(),
        })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn salt(&self) -> &str {
        &self.salt
    }

    /// Nominations to request so that about `n` survive the filter.
    pub fn inflate(&self, n: usize) -> usize {
        if self.fraction == 0.0 {
            return n;
        }
        // the slack keeps exact quotients like 10 / 0.5 from rounding up
        ((n as f64 / (1.0 - self.fraction)) - 1e-9).ceil() as usize
    }

    pub fn user_seed(&self, user: UserId) -> u64 {
        salted_hash(self.salt.as_bytes(), u64::from(user.0))
    }

    pub fn keeps(&self, user_seed: u64, content: ContentId) -> bool {
        unit_interval(hash_words(&[user_seed, u64::from(content.0)])) >= self.fraction
    }
}

/// Filters each nominator's list for one user, preserving order.
pub fn ablate_nominations(lists: &[Vec<ContentId>], spec: &AblationSpec, user: UserId) -> Vec<Vec<ContentId>> {
    let seed = spec.user_seed(user);
    lists
        .iter()
        .map(|l| l.iter().copied().filter(|&c| spec.keeps(seed, c)).collect())
        .collect()
}
