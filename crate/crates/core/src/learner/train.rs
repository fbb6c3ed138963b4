use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::grad::{accumulate, Gradients, Workspace};
use super::loss::{ClassWeights, Objective, WeightedBce};
use super::Model;
use crate::data::LabeledDataset;
use crate::{eval, seed, Error, Result};

/// Stop once the dev metric has not improved for `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Return the epoch with the lowest mean dev DET-AUC when a dev set is
    /// supplied.
    pub select_best_on_dev: bool,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            epochs: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            select_best_on_dev: true,
            early_stop: None,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return bad("adam_epsilon must be > 0");
        }
        if self.early_stop.is_some_and(|e| e.patience == 0) {
            return bad("early_stop.patience must be >= 1");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Scores a model on the dev set: mean DET-AUC over events that have both
/// positives and negatives there.
struct DevScorer<'a> {
    features: Vec<&'a [f64]>,
    columns: Vec<(usize, Vec<bool>)>,
}

impl<'a> DevScorer<'a> {
    fn new(dev: &'a LabeledDataset) -> Option<Self> {
        let columns: Vec<(usize, Vec<bool>)> = (0..dev.num_classes())
            .map(|c| (c, dev.examples().iter().map(|r| r.label.get(c)).collect::<Vec<bool>>()))
            .filter(|(_, col)| col.iter().any(|&b| b) && col.iter().any(|&b| !b))
            .collect();
        if columns.is_empty() {
            return None;
        }
        Some(Self {
            features: dev.features(),
            columns,
        })
    }

    fn mean_auc(&self, model: &Model) -> Result<f64> {
        let logits = model.forward_many(&self.features)?;
        let mut total = 0.0;
        for (c, labels) in &self.columns {
            let scores: Vec<f64> = logits.iter().map(|z| z[*c]).collect();
            total += eval::auc_det(&eval::det_curve(&scores, labels)?);
        }
        Ok(total / self.columns.len() as f64)
    }
}

/// Trains on `data` with the weighted multi-label cross-entropy.
pub fn train(
    model: &Model,
    data: &LabeledDataset,
    weights: &ClassWeights,
    params: &TrainParams,
    dev: Option<&LabeledDataset>,
) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.num_classes() != model.num_classes() || weights.len() != model.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.num_classes(),
            actual: data.num_classes(),
        });
    }
    let objective = WeightedBce::from_dataset(data, weights)?;
    train_objective(model, &objective, params, dev)
}

/// Seeded shuffled mini-batch Adam on an arbitrary objective.
///
/// Each step uses the batch-summed gradient scaled by `n / batch_len`, an
/// unbiased estimate of the full-dataset sum.
pub fn train_objective(
    model: &Model,
    objective: &dyn Objective,
    params: &TrainParams,
    dev: Option<&LabeledDataset>,
) -> Result<Model> {
    params.validate()?;
    let n = objective.len();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    for i in 0..n {
        let width = objective.features(i).len();
        if width != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                actual: width,
            });
        }
    }
    if let Some(d) = dev {
        if d.dim() != model.input_dim() || d.num_classes() != model.num_classes() {
            return Err(Error::InvalidConfig("dev set does not match the model".into()));
        }
    }
    if params.epochs == 0 {
        return Ok(model.clone());
    }

    let wants_dev = params.select_best_on_dev || params.early_stop.is_some();
    let scorer = dev.filter(|_| wants_dev).and_then(DevScorer::new);

    let mut current = model.clone();
    let mut rng = seed::rng(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut opt = Adam::new(
        &current,
        params.learning_rate,
        params.adam_beta1,
        params.adam_beta2,
        params.adam_epsilon,
    );
    let mut grads = Gradients::zeros_like(&current);
    let mut ws = Workspace::new(&current);
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0;

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(params.batch_size).enumerate() {
            grads.fill(0.0);
            let loss = accumulate(&current, objective, chunk, &mut grads, &mut ws);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch, loss });
            }
            grads.scale(n as f64 / chunk.len() as f64);
            opt.step(&mut current, &grads);
        }
        if let Some(scorer) = &scorer {
            let auc = scorer.mean_auc(&current)?;
            if best.as_ref().is_none_or(|(b, _)| auc < *b) {
                best = Some((auc, current.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            if params.early_stop.is_some_and(|e| stale >= e.patience) {
                break;
            }
        }
    }
    match best {
        Some((_, m)) if params.select_best_on_dev => Ok(m),
        _ => Ok(current),
    }
}
