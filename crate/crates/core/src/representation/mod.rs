//! The trainable scoring network.
//!
//! A small feed-forward network over `concat(user features, content
//! features)`. The output of its last hidden layer is the representation
//! handed to the Bayesian linear head; a linear read-out of that
//! representation gives the completion logit.

mod network;
mod snapshot;

pub use network::{ForwardCache, RepresentationModel, Scratch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// `tanh` through a single `exp`; within a few ulps of `f64::tanh` and
/// noticeably cheaper than libm's version.
#[inline]
fn tanh(x: f64) -> f64 {
    if x.abs() < 0.01 {
        let x2 = x * x;
        return x * (1.0 - x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0))));
    }
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub user_dim: usize,
    pub content_dim: usize,
    /// Hidden layer widths; the last one is the representation width.
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub learning_rate: f64,
    #[serde(default)]
    pub init_seed: u64,
}

impl NetworkConfig {
    pub fn input_dim(&self) -> usize {
        self.user_dim + self.content_dim
    }

    pub fn embedding_dim(&self) -> usize {
        *self.hidden.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "network needs at least one non-empty hidden layer".into(),
            ));
        }
        if self.input_dim() == 0 {
            return Err(Error::InvalidConfig("network input is empty".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Raw inputs for one (user, content) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub user: Vec<f64>,
    pub content: Vec<f64>,
}

impl FeatureRecord {
    pub fn new(user: Vec<f64>, content: Vec<f64>) -> Self {
        Self { user, content }
    }
}

pub fn sigmoid(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
