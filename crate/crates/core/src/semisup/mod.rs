//! Pseudo-labeling: self-training and ensemble-based tri-training.
//!
//! Both procedures score the whole unlabeled pool, rank candidates per class
//! and keep the top `k`. Ranking is used instead of an absolute probability
//! cut because scores on a shifted pool are poorly calibrated while their
//! order remains informative. Tri-training additionally requires the two
//! peer models to both exceed a per-class threshold before an example can
//! become a candidate for the third.

mod log;
mod self_train;
mod tri_train;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, LabeledExample, MultiHotLabel, UnlabeledPool};
use crate::learner::{
    clamp_prob, init_model, train, ClassWeights, Model, ModelConfig, Predictor, TrainParams,
};
use crate::{Error, Result};

pub use log::{load_candidate_log, save_candidate_log};
pub use self_train::{self_candidates, self_train, SelfTrainParams, SelfTrainResult};
pub use tri_train::{tri_candidates, tri_train, TriTrainParams, TriTrainResult};

/// A pool example selected as pseudo-labeled training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelCandidate {
    pub example_id: String,
    /// Event the example was selected for; `assigned_label[class]` is set.
    pub class: usize,
    pub score: f64,
    pub assigned_label: MultiHotLabel,
    pub iteration: usize,
    /// Index (0, 1 or 2) of the tri-training model that receives the example;
    /// `None` for self-training.
    pub target_model: Option<usize>,
}

/// How `w_c` is chosen for each (re)training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    /// Negatives-to-positives ratio of the effective training set.
    #[default]
    NegativePositiveRatio,
    Uniform,
}

impl WeightPolicy {
    pub fn weights(&self, data: &LabeledDataset) -> ClassWeights {
        match self {
            WeightPolicy::NegativePositiveRatio => ClassWeights::negative_positive_ratio(data),
            WeightPolicy::Uniform => ClassWeights::uniform(data.num_classes()),
        }
    }
}

/// Per-class agreement threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// The same value for every class.
    Uniform { value: f64 },
    Fixed { values: Vec<f64> },
    /// `theta_c` is the `q`-th percentile (0-100) of the mean probability the
    /// current models give to the dev-set positives of class `c`.
    DevPercentile { q: f64 },
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy::Uniform { value: 0.5 }
    }
}

impl ThetaPolicy {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        match self {
            ThetaPolicy::Uniform { value } if !in_unit(*value) => {
                Err(Error::InvalidConfig("theta must lie in (0, 1)".into()))
            }
            ThetaPolicy::Fixed { values } if values.len() != num_classes => {
                Err(Error::InvalidConfig(format!("theta needs {num_classes} values")))
            }
            ThetaPolicy::Fixed { values } if !values.iter().all(|v| in_unit(*v)) => {
                Err(Error::InvalidConfig("theta must lie in (0, 1)".into()))
            }
            ThetaPolicy::DevPercentile { q } if !(0.0..=100.0).contains(q) => {
                Err(Error::InvalidConfig("percentile must lie in [0, 100]".into()))
            }
            _ => Ok(()),
        }
    }

    /// Concrete thresholds for the current models.
    pub fn resolve(&self, num_classes: usize, models: &[Model], dev: Option<&LabeledDataset>) -> Result<Vec<f64>> {
        match self {
            ThetaPolicy::Uniform { value } => Ok(vec![*value; num_classes]),
            ThetaPolicy::Fixed { values } => Ok(values.clone()),
            ThetaPolicy::DevPercentile { q } => {
                let dev = dev.ok_or_else(|| {
                    Error::InvalidConfig("dev-percentile theta requires a dev set".into())
                })?;
                let mut mean = vec![vec![0.0; num_classes]; dev.len()];
                for m in models {
                    for (row, p) in mean.iter_mut().zip(m.predict_proba_many(&dev.features())?) {
                        for (a, b) in row.iter_mut().zip(p) {
                            *a += b / models.len() as f64;
                        }
                    }
                }
                (0..num_classes)
                    .map(|c| {
                        let mut v: Vec<f64> = dev
                            .examples()
                            .iter()
                            .zip(&mean)
                            .filter(|(r, _)| r.label.get(c))
                            .map(|(_, p)| p[c])
                            .collect();
                        if v.is_empty() {
                            return Err(Error::InvalidConfig(format!(
                                "dev set has no positives for class {c}"
                            )));
                        }
                        v.sort_by(f64::total_cmp);
                        Ok(clamp_prob(percentile(&v, *q)))
                    })
                    .collect()
            }
        }
    }
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-model matrices of class probabilities, `[model][example][class]`.
pub fn score_pool(models: &[&Model], pool: &UnlabeledPool) -> Result<Vec<Vec<Vec<f64>>>> {
    let xs: Vec<&[f64]> = pool.examples().iter().map(|e| e.features.as_slice()).collect();
    models
        .iter()
        .map(|m| {
            if m.input_dim() != pool.dim() {
                return Err(Error::DimensionMismatch {
                    expected: m.input_dim(),
                    actual: pool.dim(),
                });
            }
            m.predict_proba_many(&xs)
        })
        .collect()
}

/// The `k` highest-scoring candidates in descending score order; ties go to
/// the lexicographically smaller example id.
pub fn select_top_k(mut candidates: Vec<PseudoLabelCandidate>, k: usize) -> Vec<PseudoLabelCandidate> {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.example_id.cmp(&b.example_id))
    });
    candidates.truncate(k);
    candidates
}

/// `base` plus one row per distinct `(example_id, class)` among `candidates`
/// (first occurrence wins). Rows for the same pool example selected for
/// several classes are numbered through `replica`.
pub fn augment(
    base: &LabeledDataset,
    pool: &UnlabeledPool,
    candidates: &[PseudoLabelCandidate],
) -> Result<LabeledDataset> {
    let by_id: HashMap<&str, usize> = pool
        .examples()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let mut seen: HashSet<(&str, usize)> = HashSet::new();
    let mut copies: HashMap<&str, u32> = HashMap::new();
    let mut rows: Vec<LabeledExample> = base.examples().to_vec();
    for cand in candidates {
        if !seen.insert((cand.example_id.as_str(), cand.class)) {
            continue;
        }
        let idx = *by_id.get(cand.example_id.as_str()).ok_or_else(|| {
            Error::InvalidConfig(format!("candidate `{}` is not in the pool", cand.example_id))
        })?;
        let replica = copies.entry(cand.example_id.as_str()).or_insert(0);
        rows.push(LabeledExample {
            example: pool.examples()[idx].clone(),
            label: cand.assigned_label.clone(),
            replica: *replica,
        });
        *replica += 1;
    }
    base.with_examples(rows)
}

/// Fresh model trained on `data` with class weights from `policy`.
pub(crate) fn fit(
    data: &LabeledDataset,
    config: &ModelConfig,
    params: &TrainParams,
    policy: WeightPolicy,
    dev: Option<&LabeledDataset>,
) -> Result<Model> {
    let model = init_model(config)?;
    train(&model, data, &policy.weights(data), params, dev)
}
