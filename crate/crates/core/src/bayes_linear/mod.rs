//! Streaming Bayesian linear regression over a fixed-width representation.
//!
//! Training accumulates sufficient statistics sample by sample
//! ([`CovarianceAccumulator`]); the expensive factorization happens once per
//! training run in [`CovarianceAccumulator::finalize`], which produces an
//! immutable [`PosteriorState`] that serving code queries for posterior
//! means, variances and Thompson samples.

mod accumulator;
pub mod cholesky;
mod posterior;
mod snapshot;

use std::ops::Deref;

pub use accumulator::CovarianceAccumulator;
pub use posterior::{PosteriorState, ScoreDistribution, Strategy};
pub(crate) use posterior::sample_normal;

use crate::error::{Error, Result};

/// Ridge prior scale used when a scenario does not override it.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Observation noise used when a scenario does not override it.
pub const DEFAULT_SIGMA_SQ: f64 = 10.0;
/// Singular values below `PINV_RELATIVE_TOLERANCE * sigma_max` are treated as zero.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

/// A representation vector with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

pub(crate) fn check_dim(expected: usize, phi: &[f64]) -> Result<()> {
    if phi.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: phi.len(),
        });
    }
    Ok(())
}
