use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, softplus, Activation, FeatureRecord, NetworkConfig};
use crate::bayes_linear::FeatureVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
struct LayerShape {
    in_dim: usize,
    out_dim: usize,
    /// Offset of the row-major `out_dim x in_dim` weights; biases follow.
    offset: usize,
}

impl LayerShape {
    fn bias_offset(&self) -> usize {
        self.offset + self.in_dim * self.out_dim
    }

    fn end(&self) -> usize {
        self.bias_offset() + self.out_dim
    }
}

/// Feed-forward network whose last hidden layer is the representation.
///
/// All parameters live in one flat vector: each layer's weights then biases,
/// followed by the linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationModel {
    config: NetworkConfig,
    layers: Vec<LayerShape>,
    head_offset: usize,
    params: Vec<f64>,
}

/// Activations of every layer for one input, kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[i + 1]` is layer `i`'s output.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn embedding(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Reusable buffers for allocation-free inference.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl RepresentationModel {
    /// Builds a network with uniform fan-in scaled initialization.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.hidden.len());
        let mut in_dim = config.input_dim();
        let mut offset = 0;
        for &out_dim in &config.hidden {
            let shape = LayerShape { in_dim, out_dim, offset };
            offset = shape.end();
            layers.push(shape);
            in_dim = out_dim;
        }
        let head_offset = offset;
        let mut params = vec![0.0; head_offset + config.embedding_dim()];
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        for shape in &layers {
            let bound = 1.0 / (shape.in_dim as f64).sqrt();
            for w in &mut params[shape.offset..shape.end()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        let bound = 1.0 / (config.embedding_dim() as f64).sqrt();
        for w in &mut params[head_offset..] {
            *w = rng.random_range(-bound..bound);
        }
        Ok(Self {
            config,
            layers,
            head_offset,
            params,
        })
    }

    /// A single identity layer: the representation of `x` is `x` itself.
    pub fn identity(dim: usize, learning_rate: f64) -> Result<Self> {
        let mut model = Self::new(NetworkConfig {
            user_dim: dim,
            content_dim: 0,
            hidden: vec![dim],
            activation: Activation::Identity,
            learning_rate,
            init_seed: 0,
        })?;
        let shape = model.layers[0];
        model.params[shape.offset..shape.end()].fill(0.0);
        for i in 0..dim {
            model.params[shape.offset + i * dim + i] = 1.0;
        }
        Ok(model)
    }

    pub(crate) fn from_raw(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::new(config)?;
        if params.len() != model.params.len() {
            return Err(Error::Snapshot(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim()
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn head(&self) -> &[f64] {
        &self.params[self.head_offset..]
    }

    pub fn set_head(&mut self, head: &[f64]) -> Result<()> {
        crate::bayes_linear::check_dim(self.embedding_dim(), head)?;
        self.params[self.head_offset..].copy_from_slice(head);
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn check_schema(&self, rec: &FeatureRecord) -> Result<()> {
        self.check_parts(&rec.user, &rec.content)
    }

    fn check_parts(&self, user: &[f64], content: &[f64]) -> Result<()> {
        if user.len() != self.config.user_dim || content.len() != self.config.content_dim {
            return Err(Error::SchemaMismatch {
                expected: (self.config.user_dim, self.config.content_dim),
                actual: (user.len(), content.len()),
            });
        }
        Ok(())
    }

    /// Writes the representation into `out`, reusing `scratch`.
    pub fn embed_into(
        &self,
        user: &[f64],
        content: &[f64],
        scratch: &mut Scratch,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.check_parts(user, content)?;
        let Scratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(user);
        a.extend_from_slice(content);
        let act = self.config.activation;
        for shape in &self.layers {
            self.layer_forward(shape, a, b, act);
            std::mem::swap(a, b);
        }
        out.clear();
        out.extend_from_slice(a);
        Ok(())
    }

    #[inline]
    fn layer_forward(&self, shape: &LayerShape, input: &[f64], output: &mut Vec<f64>, act: Activation) {
        let w = &self.params[shape.offset..shape.bias_offset()];
        let bias = &self.params[shape.bias_offset()..shape.end()];
        output.clear();
        output.extend(
            w.chunks_exact(shape.in_dim)
                .zip(bias)
                .map(|(row, &b)| act.apply(dot(row, input) + b)),
        );
    }

    pub fn embed(&self, rec: &FeatureRecord) -> Result<FeatureVector> {
        let mut out = Vec::with_capacity(self.embedding_dim());
        self.embed_into(&rec.user, &rec.content, &mut Scratch::default(), &mut out)?;
        FeatureVector::new(out)
    }

    /// Logit as the dot product of the representation with the head.
    pub fn logit_from_embedding(&self, phi: &[f64]) -> f64 {
        phi.iter().zip(self.head()).map(|(x, w)| x * w).sum()
    }

    pub fn predict_logit(&self, rec: &FeatureRecord) -> Result<f64> {
        let phi = self.embed(rec)?;
        Ok(self.logit_from_embedding(&phi))
    }

    pub fn predict_probability(&self, rec: &FeatureRecord) -> Result<f64> {
        Ok(sigmoid(self.predict_logit(rec)?))
    }

    pub fn forward(&self, rec: &FeatureRecord) -> Result<ForwardCache> {
        self.check_schema(rec)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut input = rec.user.clone();
        input.extend_from_slice(&rec.content);
        activations.push(input);
        for shape in &self.layers {
            let mut out = Vec::with_capacity(shape.out_dim);
            self.layer_forward(shape, activations.last().unwrap(), &mut out, self.config.activation);
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Accumulates into `grad` the gradient of the hidden layers given the
    /// upstream gradient `d_phi` with respect to the representation.
    pub fn backprop_embedding(&self, cache: &ForwardCache, d_phi: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let act = self.config.activation;
        let mut upstream = d_phi.to_vec();
        for (li, shape) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[li];
            let output = &cache.activations[li + 1];
            let d_pre: Vec<f64> = upstream
                .iter()
                .zip(output)
                .map(|(g, &y)| g * act.derivative_from_output(y))
                .collect();
            let w_off = shape.offset;
            for (o, &dp) in d_pre.iter().enumerate() {
                if dp == 0.0 {
                    continue;
                }
                let row = &mut grad[w_off + o * shape.in_dim..w_off + (o + 1) * shape.in_dim];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += dp * x;
                }
                grad[shape.bias_offset() + o] += dp;
            }
            if li > 0 {
                let w = &self.params[w_off..shape.bias_offset()];
                let mut next = vec![0.0; shape.in_dim];
                for (o, &dp) in d_pre.iter().enumerate() {
                    if dp == 0.0 {
                        continue;
                    }
                    for (n, &wv) in next.iter_mut().zip(&w[o * shape.in_dim..(o + 1) * shape.in_dim]) {
                        *n += dp * wv;
                    }
                }
                upstream = next;
            }
        }
    }

    /// Mean binary cross-entropy over the batch.
    pub fn loss(&self, batch: &[(&FeatureRecord, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (rec, label) in batch {
            let z = self.predict_logit(rec)?;
            total += softplus(z) - label * z;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean binary cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[(&FeatureRecord, f64)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let n = batch.len() as f64;
        let mut total = 0.0;
        for (rec, label) in batch {
            let cache = self.forward(rec)?;
            let phi = cache.embedding();
            let z = self.logit_from_embedding(phi);
            total += softplus(z) - label * z;
            let dz = (sigmoid(z) - label) / n;
            for (g, &p) in grad[self.head_offset..].iter_mut().zip(phi) {
                *g += dz * p;
            }
            let d_phi: Vec<f64> = self.head().iter().map(|w| dz * w).collect();
            self.backprop_embedding(&cache, &d_phi, &mut grad);
        }
        Ok((total / n, grad))
    }

    /// One gradient step on the batch; returns the loss before the step.
    pub fn sgd_step(&mut self, batch: &[(&FeatureRecord, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("sgd_step needs a nonempty batch".into()));
        }
        let (loss, grad) = self.loss_and_gradient(batch)?;
        let lr = self.config.learning_rate;
        if lr != 0.0 {
            for (p, g) in self.params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
        Ok(loss)
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
