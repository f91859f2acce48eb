use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_dim, cholesky};
use crate::error::Result;

/// How the Gram matrix is turned into something that answers variance queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    PseudoInverse,
    Cholesky,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Factor {
    Precision(DMatrix<f64>),
    Cholesky(DMatrix<f64>),
}

/// Gaussian belief over a score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreDistribution {
    pub mean: f64,
    pub variance: f64,
}

/// Frozen posterior over the linear head, published once per training run.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorState {
    beta_hat: DVector<f64>,
    factor: Factor,
    sigma_sq: f64,
    epsilon: f64,
    source_count: u64,
}

impl PosteriorState {
    pub(crate) fn from_parts(
        beta_hat: DVector<f64>,
        factor: Factor,
        sigma_sq: f64,
        epsilon: f64,
        source_count: u64,
    ) -> Self {
        Self {
            beta_hat,
            factor,
            sigma_sq,
            epsilon,
            source_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.beta_hat
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn source_count(&self) -> u64 {
        self.source_count
    }

    pub fn strategy(&self) -> Strategy {
        match self.factor {
            Factor::Precision(_) => Strategy::PseudoInverse,
            Factor::Cholesky(_) => Strategy::Cholesky,
        }
    }

    /// The pseudo-inverse of the Gram matrix, for pseudo-inverse states.
    pub fn precision(&self) -> Option<&DMatrix<f64>> {
        match &self.factor {
            Factor::Precision(p) => Some(p),
            Factor::Cholesky(_) => None,
        }
    }

    /// Lower Cholesky factor of the Gram matrix, for Cholesky states.
    pub fn cholesky_factor(&self) -> Option<&DMatrix<f64>> {
        match &self.factor {
            Factor::Cholesky(l) => Some(l),
            Factor::Precision(_) => None,
        }
    }

    pub(crate) fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn mean(&self, phi: &[f64]) -> Result<f64> {
        check_dim(self.dim(), phi)?;
        Ok(dot(self.beta_hat.as_slice(), phi))
    }

    /// `sigma^2 * phi^T Sigma^-1 phi`, never negative.
    pub fn variance(&self, phi: &[f64]) -> Result<f64> {
        check_dim(self.dim(), phi)?;
        let quad = match &self.factor {
            Factor::Precision(p) => {
                let d = self.dim();
                let data = p.as_slice();
                let mut acc = 0.0;
                for (i, &pi) in phi.iter().enumerate() {
                    if pi != 0.0 {
                        acc += pi * dot(&data[i * d..(i + 1) * d], phi);
                    }
                }
                acc
            }
            Factor::Cholesky(l) => {
                let z = cholesky::forward_substitute(l, phi);
                dot(&z, &z)
            }
        };
        Ok((self.sigma_sq * quad).max(0.0))
    }

    pub fn stats(&self, phi: &[f64]) -> Result<ScoreDistribution> {
        Ok(ScoreDistribution {
            mean: self.mean(phi)?,
            variance: self.variance(phi)?,
        })
    }

    /// One draw from the posterior of the score at `phi`.
    pub fn sample_score<R: Rng + ?Sized>(&self, phi: &[f64], rng: &mut R) -> Result<f64> {
        let s = self.stats(phi)?;
        Ok(sample_normal(s.mean, s.variance, rng))
    }
}

pub(crate) fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * z
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
