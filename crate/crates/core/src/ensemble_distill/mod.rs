//! Probability-averaged ensembles and knowledge distillation.

mod distill;
mod files;

use crate::learner::{logit, Model, Predictor};
use crate::{Error, Result};

pub use distill::{distill, distill_from_logits, kd_loss, DistillParams, KdLossParts, KdObjective};
pub use files::{load_ensemble, load_teacher_logits, save_ensemble_manifest, save_teacher_logits, EnsembleManifest};

/// Members sharing input width and class count. Predictions are the
/// arithmetic mean of member probabilities, so member order is irrelevant.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Model>,
}

impl Ensemble {
    pub fn new(members: Vec<Model>) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("ensemble"))?;
        let (d, c) = (first.input_dim(), first.num_classes());
        for (index, m) in members.iter().enumerate() {
            if m.input_dim() != d || m.num_classes() != c {
                return Err(Error::IncompatibleMember {
                    index,
                    reason: format!(
                        "shape {}->{} differs from {d}->{c}",
                        m.input_dim(),
                        m.num_classes()
                    ),
                });
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Model] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean of the members' sigmoid probabilities, per class.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut mean = vec![0.0; self.num_classes()];
        for m in &self.members {
            for (acc, p) in mean.iter_mut().zip(m.predict_proba(x)?) {
                *acc += p;
            }
        }
        let n = self.members.len() as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        Ok(mean)
    }

    /// Log-odds of the clamped mean probability.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(x)?.into_iter().map(logit).collect())
    }

    pub fn logits_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict_proba_many(xs)?
            .into_iter()
            .map(|p| p.into_iter().map(logit).collect())
            .collect())
    }
}

impl Predictor for Ensemble {
    fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    fn num_classes(&self) -> usize {
        self.members[0].num_classes()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict(x)
    }

    fn predict_proba_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let mut mean = vec![vec![0.0; self.num_classes()]; xs.len()];
        for m in &self.members {
            for (row, p) in mean.iter_mut().zip(m.predict_proba_many(xs)?) {
                for (acc, v) in row.iter_mut().zip(p) {
                    *acc += v;
                }
            }
        }
        let n = self.members.len() as f64;
        for row in &mut mean {
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{clamp_prob, init_model, sigmoid_t, Layer, ModelConfig};
    use crate::seed;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn cfg(seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim: 3,
            hidden: vec![5],
            num_classes: 2,
            seed,
        }
    }

    /// Single linear layer with zero weights and the given biases.
    fn constant(probs: &[f64]) -> Model {
        let config = ModelConfig {
            input_dim: 1,
            hidden: vec![],
            num_classes: probs.len(),
            seed: 0,
        };
        let mut layer = Layer::zeros(1, probs.len());
        layer.bias = probs.iter().map(|&p| logit(p)).collect();
        Model::from_layers(config, vec![layer]).unwrap()
    }

    #[test]
    fn identical_members_equal_single_model() {
        let m = init_model(&cfg(1)).unwrap();
        let ens = Ensemble::new(vec![m.clone(), m.clone(), m.clone()]).unwrap();
        let x = [0.3, -0.2, 1.0];
        let single = m.predict_proba(&x).unwrap();
        for (a, b) in ens.predict(&x).unwrap().iter().zip(&single) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn averages_probabilities() {
        let ens = Ensemble::new(vec![constant(&[0.2]), constant(&[0.8])]).unwrap();
        let p = ens.predict(&[0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(ens.logits(&[0.0]).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn logit_of_known_probability() {
        let ens = Ensemble::new(vec![constant(&[0.731_058_578_630_004_9])]).unwrap();
        assert!((ens.logits(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_naive_average_and_is_permutation_invariant() {
        let mut rng = seed::rng(12);
        let mut members: Vec<Model> = (0..6).map(|s| init_model(&cfg(s)).unwrap()).collect();
        let ens = Ensemble::new(members.clone()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = ens.predict(&x).unwrap();
            for (c, g) in got.iter().enumerate() {
                let mut s = 0.0;
                for m in &members {
                    s += sigmoid_t(m.forward(&x).unwrap()[c], 1.0);
                }
                assert!((g - s / 6.0).abs() < 1e-12);
            }
            let round = ens.logits(&x).unwrap();
            for c in 0..2 {
                assert!((sigmoid_t(round[c], 1.0) - clamp_prob(got[c])).abs() < 1e-9);
            }
        }
        members.shuffle(&mut rng);
        let shuffled = Ensemble::new(members).unwrap();
        let x = [0.5, 0.1, -0.7];
        for (a, b) in ens.predict(&x).unwrap().iter().zip(shuffled.predict(&x).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_incompatible_members() {
        let a = init_model(&cfg(0)).unwrap();
        let b = constant(&[0.5, 0.5]);
        assert!(matches!(
            Ensemble::new(vec![a, b]),
            Err(Error::IncompatibleMember { index: 1, .. })
        ));
        assert!(matches!(Ensemble::new(vec![]), Err(Error::Empty(_))));
    }

    #[test]
    fn dimension_mismatch_propagates() {
        let ens = Ensemble::new(vec![init_model(&cfg(0)).unwrap()]).unwrap();
        assert!(ens.predict(&[1.0]).is_err());
    }
}
