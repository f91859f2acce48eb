use crate::bayes_linear::ScoreDistribution;
use crate::error::{Error, Result};
use crate::representation::{sigmoid, softplus, FeatureRecord, NetworkConfig, RepresentationModel, Scratch};

/// A set of independently initialized scoring models.
///
/// `SharedBottom` keeps one trunk and only replicates the linear heads,
/// which is cheaper to train and serve.
#[derive(Clone, Debug, PartialEq)]
pub enum Ensemble {
    Independent(Vec<RepresentationModel>),
    SharedBottom {
        trunk: RepresentationModel,
        heads: Vec<Vec<f64>>,
    },
}

impl Ensemble {
    /// `size` members seeded `base_seed, base_seed + 1, ...`.
    pub fn independent(config: &NetworkConfig, size: usize, base_seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        let members = (0..size as u64)
            .map(|i| {
                let mut cfg = config.clone();
                cfg.init_seed = base_seed.wrapping_add(i);
                RepresentationModel::new(cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble::Independent(members))
    }

    pub fn shared_bottom(config: &NetworkConfig, size: usize, base_seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        let mut cfg = config.clone();
        cfg.init_seed = base_seed;
        let trunk = RepresentationModel::new(cfg.clone())?;
        let heads = (0..size as u64)
            .map(|i| {
                cfg.init_seed = base_seed.wrapping_add(i);
                RepresentationModel::new(cfg.clone()).map(|m| m.head().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble::SharedBottom { trunk, heads })
    }

    pub fn from_models(members: Vec<RepresentationModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        let first = members[0].config();
        if members
            .iter()
            .any(|m| m.config().user_dim != first.user_dim || m.config().content_dim != first.content_dim)
        {
            return Err(Error::InvalidConfig("ensemble members disagree on input schema".into()));
        }
        Ok(Ensemble::Independent(members))
    }

    pub fn len(&self) -> usize {
        match self {
            Ensemble::Independent(m) => m.len(),
            Ensemble::SharedBottom { heads, .. } => heads.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_schema(&self, rec: &FeatureRecord) -> Result<()> {
        match self {
            Ensemble::Independent(m) => m[0].check_schema(rec),
            Ensemble::SharedBottom { trunk, .. } => trunk.check_schema(rec),
        }
    }

    /// Per-member logits for one record.
    pub fn logits_into(
        &self,
        user: &[f64],
        content: &[f64],
        scratch: &mut Scratch,
        phi: &mut Vec<f64>,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        out.clear();
        match self {
            Ensemble::Independent(members) => {
                for m in members {
                    m.embed_into(user, content, scratch, phi)?;
                    out.push(m.logit_from_embedding(phi));
                }
            }
            Ensemble::SharedBottom { trunk, heads } => {
                trunk.embed_into(user, content, scratch, phi)?;
                out.extend(heads.iter().map(|h| dot(h, phi)));
            }
        }
        Ok(())
    }

    pub fn logits(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        self.logits_into(&rec.user, &rec.content, &mut Scratch::default(), &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    /// Member probabilities `sigmoid(logit_e)`.
    pub fn probabilities(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        Ok(self.logits(rec)?.into_iter().map(sigmoid).collect())
    }

    /// Across-member mean and unbiased variance of the logit.
    pub fn logit_stats(&self, rec: &FeatureRecord) -> Result<ScoreDistribution> {
        Ok(mean_and_unbiased_variance(&self.logits(rec)?))
    }

    /// One gradient step of every member on the batch; returns the mean loss.
    pub fn sgd_step(&mut self, batch: &[(&FeatureRecord, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("sgd_step needs a nonempty batch".into()));
        }
        match self {
            Ensemble::Independent(members) => {
                let mut total = 0.0;
                for m in members.iter_mut() {
                    total += m.sgd_step(batch)?;
                }
                Ok(total / members.len() as f64)
            }
            Ensemble::SharedBottom { trunk, heads } => shared_bottom_step(trunk, heads, batch),
        }
    }
}

/// Each head steps on its own mean cross-entropy; the trunk steps on the
/// mean of those losses over heads.
fn shared_bottom_step(
    trunk: &mut RepresentationModel,
    heads: &mut [Vec<f64>],
    batch: &[(&FeatureRecord, f64)],
) -> Result<f64> {
    let n = batch.len() as f64;
    let e = heads.len() as f64;
    let mut trunk_grad = vec![0.0; trunk.num_params()];
    let mut head_grads = vec![vec![0.0; trunk.embedding_dim()]; heads.len()];
    let mut total = 0.0;
    for (rec, label) in batch {
        let cache = trunk.forward(rec)?;
        let phi = cache.embedding();
        let mut d_phi = vec![0.0; phi.len()];
        for (head, hg) in heads.iter().zip(head_grads.iter_mut()) {
            let z = dot(head, phi);
            total += softplus(z) - label * z;
            let dz = (sigmoid(z) - label) / (n * e);
            for ((g, dp), (&p, &w)) in hg.iter_mut().zip(d_phi.iter_mut()).zip(phi.iter().zip(head)) {
                *g += dz * p;
                *dp += dz * w;
            }
        }
        trunk.backprop_embedding(&cache, &d_phi, &mut trunk_grad);
    }
    let lr = trunk.learning_rate();
    // the trunk's own head is unused
    let head_len = trunk.embedding_dim();
    let body = trunk_grad.len() - head_len;
    for (p, g) in trunk.params_mut()[..body].iter_mut().zip(&trunk_grad[..body]) {
        *p -= lr * g;
    }
    for (head, hg) in heads.iter_mut().zip(&head_grads) {
        for (w, g) in head.iter_mut().zip(hg) {
            *w -= lr * g * e;
        }
    }
    Ok(total / (n * e))
}

pub(crate) fn mean_and_unbiased_variance(xs: &[f64]) -> ScoreDistribution {
    let n = xs.len();
    if n == 0 {
        return ScoreDistribution { mean: 0.0, variance: 0.0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n < 2 {
        0.0
    } else {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    };
    ScoreDistribution { mean, variance }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::Activation;

    fn cfg() -> NetworkConfig {
        NetworkConfig {
            user_dim: 2,
            content_dim: 2,
            hidden: vec![5, 3],
            activation: Activation::Tanh,
            learning_rate: 0.2,
            init_seed: 0,
        }
    }

    #[test]
    fn identical_members_have_zero_variance() {
        let m = RepresentationModel::new(cfg()).unwrap();
        let ens = Ensemble::from_models(vec![m.clone(), m.clone(), m]).unwrap();
        let rec = FeatureRecord::new(vec![0.2, 0.1], vec![-0.5, 1.0]);
        let s = ens.logit_stats(&rec).unwrap();
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn distinct_seeds_disagree() {
        let ens = Ensemble::independent(&cfg(), 5, 10).unwrap();
        let rec = FeatureRecord::new(vec![0.2, 0.1], vec![-0.5, 1.0]);
        assert!(ens.logit_stats(&rec).unwrap().variance > 0.0);
        let sb = Ensemble::shared_bottom(&cfg(), 5, 10).unwrap();
        assert_eq!(sb.len(), 5);
        assert!(sb.logit_stats(&rec).unwrap().variance > 0.0);
    }

    #[test]
    fn unbiased_variance_of_two_points() {
        let s = mean_and_unbiased_variance(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 2.0);
        assert_eq!(mean_and_unbiased_variance(&[4.0]).variance, 0.0);
    }

    #[test]
    fn shared_bottom_training_reduces_loss() {
        let mut ens = Ensemble::shared_bottom(&cfg(), 3, 1).unwrap();
        let recs: Vec<FeatureRecord> = (0..20)
            .map(|i| {
                let x = i as f64 / 10.0 - 1.0;
                FeatureRecord::new(vec![x, 0.5], vec![-x, 0.1])
            })
            .collect();
        let batch: Vec<(&FeatureRecord, f64)> = recs
            .iter()
            .map(|r| (r, if r.user[0] > 0.0 { 1.0 } else { 0.0 }))
            .collect();
        let first = ens.sgd_step(&batch).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = ens.sgd_step(&batch).unwrap();
        }
        assert!(last < first * 0.8, "{first} -> {last}");
    }
}
