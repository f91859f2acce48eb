use nalgebra::{DMatrix, DVector};

use super::posterior::{Factor, PosteriorState, Strategy};
use super::{check_dim, cholesky, PINV_RELATIVE_TOLERANCE};
use crate::error::{Error, Result};

/// Sufficient statistics of a ridge-regularized linear model.
///
/// `gram` starts at `epsilon * I` and receives one rank-1 update per sample;
/// `moment` collects `phi * reward`. Accumulators built over disjoint data can
/// be merged, with the prior counted once.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceAccumulator {
    dim: usize,
    epsilon: f64,
    sigma_sq: f64,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    count: u64,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize, epsilon: f64, sigma_sq: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("accumulator dimension must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_sq must be positive, got {sigma_sq}")));
        }
        Ok(Self {
            dim,
            epsilon,
            sigma_sq,
            gram: DMatrix::identity(dim, dim) * epsilon,
            moment: DVector::zeros(dim),
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds `phi phi^T` to the Gram matrix and `phi * reward` to the moment.
    pub fn accumulate(&mut self, phi: &[f64], reward: f64) -> Result<()> {
        check_dim(self.dim, phi)?;
        if !reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        let d = self.dim;
        let g = self.gram.as_mut_slice();
        for j in 0..d {
            let pj = phi[j];
            if pj == 0.0 {
                continue;
            }
            // one product feeds both triangles, so symmetry is exact
            g[j * d + j] += pj * pj;
            for i in (j + 1)..d {
                let v = phi[i] * pj;
                g[j * d + i] += v;
                g[i * d + j] += v;
            }
        }
        for (m, &p) in self.moment.iter_mut().zip(phi) {
            *m += p * reward;
        }
        self.count += 1;
        Ok(())
    }

    /// Combines two accumulators over disjoint samples.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::ConfigMismatch(format!(
                "dimension {} vs {}",
                self.dim, other.dim
            )));
        }
        if self.epsilon != other.epsilon || self.sigma_sq != other.sigma_sq {
            return Err(Error::ConfigMismatch(format!(
                "(epsilon, sigma_sq) ({}, {}) vs ({}, {})",
                self.epsilon, self.sigma_sq, other.epsilon, other.sigma_sq
            )));
        }
        let mut gram = &self.gram + &other.gram;
        for i in 0..self.dim {
            gram[(i, i)] -= self.epsilon;
        }
        Ok(Self {
            dim: self.dim,
            epsilon: self.epsilon,
            sigma_sq: self.sigma_sq,
            gram,
            moment: &self.moment + &other.moment,
            count: self.count + other.count,
        })
    }

    /// Factorizes the Gram matrix once and freezes the result.
    pub fn finalize(&self, strategy: Strategy) -> Result<PosteriorState> {
        let (beta_hat, factor) = match strategy {
            Strategy::PseudoInverse => {
                let precision = pseudo_inverse(&self.gram);
                let beta = &precision * &self.moment;
                (beta, Factor::Precision(precision))
            }
            Strategy::Cholesky => {
                let l = cholesky::factorize(&self.gram)?;
                let y = cholesky::forward_substitute(&l, self.moment.as_slice());
                let beta = cholesky::backward_substitute_transposed(&l, &y);
                (DVector::from_vec(beta), Factor::Cholesky(l))
            }
        };
        if beta_hat.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("posterior mean"));
        }
        Ok(PosteriorState::from_parts(
            beta_hat,
            factor,
            self.sigma_sq,
            self.epsilon,
            self.count,
        ))
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix, symmetrized.
fn pseudo_inverse(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = gram.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_RELATIVE_TOLERANCE * sigma_max;
    let pinv = svd
        .pseudo_inverse(cutoff)
        .expect("both singular vector sets were requested");
    (&pinv + pinv.transpose()) * 0.5
}
