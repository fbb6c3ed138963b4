use serde::{Deserialize, Serialize};

use super::{augment, fit, score_pool, select_top_k, PseudoLabelCandidate, ThetaPolicy, WeightPolicy};
use crate::data::{LabeledDataset, MultiHotLabel, UnlabeledPool};
use crate::learner::{Model, ModelConfig, TrainParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainParams {
    pub model: ModelConfig,
    pub k: usize,
    pub iterations: usize,
    /// Used only to fill the non-selected classes of a pseudo-label.
    pub theta: ThetaPolicy,
    pub train: TrainParams,
    pub weights: WeightPolicy,
}

impl SelfTrainParams {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            k: 5000,
            iterations: 1,
            theta: ThetaPolicy::default(),
            train: TrainParams::default(),
            weights: WeightPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        self.theta.validate(self.model.num_classes)?;
        self.train.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SelfTrainResult {
    pub initial: Model,
    pub model: Model,
    pub candidates: Vec<PseudoLabelCandidate>,
}

/// Top-`k` pool examples per class ranked by the model's own class
/// probability. The selected class is set in the assigned label; every other
/// class is set iff its probability exceeds `theta`.
pub fn self_candidates(
    pool: &UnlabeledPool,
    probs: &[Vec<f64>],
    theta: &[f64],
    k: usize,
    iteration: usize,
) -> Vec<PseudoLabelCandidate> {
    let labels: Vec<MultiHotLabel> = probs
        .iter()
        .map(|p| MultiHotLabel::new(p.iter().zip(theta).map(|(v, t)| v > t).collect()))
        .collect();
    let mut out = Vec::new();
    for c in 0..theta.len() {
        let per_class = pool
            .examples()
            .iter()
            .zip(probs)
            .zip(&labels)
            .map(|((ex, p), label)| {
                let mut assigned = label.clone();
                assigned.set(c, true);
                PseudoLabelCandidate {
                    example_id: ex.id.clone(),
                    class: c,
                    score: p[c],
                    assigned_label: assigned,
                    iteration,
                    target_model: None,
                }
            })
            .collect();
        out.extend(select_top_k(per_class, k));
    }
    out
}

/// Self-training: fit on the labeled data, then per iteration pseudo-label
/// the top `k` pool examples per class and refit from scratch on the labeled
/// data plus every selection so far.
///
/// Iteration `t` uses model seed `model.seed + t` and training seed
/// `train.seed + t`.
pub fn self_train(
    labeled: &LabeledDataset,
    pool: &UnlabeledPool,
    params: &SelfTrainParams,
    dev: Option<&LabeledDataset>,
) -> Result<SelfTrainResult> {
    params.validate()?;
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    if pool.dim() != labeled.dim() {
        return Err(Error::DimensionMismatch {
            expected: labeled.dim(),
            actual: pool.dim(),
        });
    }
    pool.check_disjoint(labeled)?;
    let c_total = labeled.num_classes();
    let at = |t: usize| {
        (
            params.model.with_seed(params.model.seed.wrapping_add(t as u64)),
            params.train.with_seed(params.train.seed.wrapping_add(t as u64)),
        )
    };
    let (cfg, tp) = at(0);
    let initial = fit(labeled, &cfg, &tp, params.weights, dev)?;
    let mut model = initial.clone();
    let mut candidates = Vec::new();
    for t in 1..=params.iterations {
        let probs = score_pool(&[&model], pool)?.remove(0);
        let theta = params.theta.resolve(c_total, std::slice::from_ref(&model), dev)?;
        candidates.extend(self_candidates(pool, &probs, &theta, params.k, t));
        let data = augment(labeled, pool, &candidates)?;
        let (cfg, tp) = at(t);
        model = fit(&data, &cfg, &tp, params.weights, dev)?;
    }
    Ok(SelfTrainResult {
        initial,
        model,
        candidates,
    })
}
