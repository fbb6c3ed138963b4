use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, MultiHotLabel};
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
/// log or logit.
pub const PROB_CLAMP: f64 = 1e-7;

const EXP_LIMIT: f64 = 700.0;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).clamp(-EXP_LIMIT, EXP_LIMIT).exp())
}

/// Temperature-scaled sigmoid `1 / (1 + exp(-z / T))`.
pub fn sigmoid_t(z: f64, temperature: f64) -> f64 {
    sigmoid(z / temperature)
}

/// Log-odds of the clamped probability.
pub fn logit(p: f64) -> f64 {
    let p = clamp_prob(p);
    (p / (1.0 - p)).ln()
}

/// Per-class positive penalty `w_c` of the weighted cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig(
                "class weights must be positive and finite".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn uniform(num_classes: usize) -> Self {
        Self(vec![1.0; num_classes])
    }

    /// `w_c = negatives_c / positives_c` over `data`, with both counts floored
    /// at 1 so the weight stays positive and finite.
    pub fn negative_positive_ratio(data: &LabeledDataset) -> Self {
        let n = data.len();
        Self(
            data.positive_counts()
                .into_iter()
                .map(|pos| (n - pos).max(1) as f64 / pos.max(1) as f64)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `-(w y ln p + (1 - y) ln(1 - p))` on the clamped probability. `y` may be
/// a soft target in `[0, 1]`.
pub fn weighted_bce_term(p: f64, y: f64, w: f64) -> f64 {
    let p = clamp_prob(p);
    -(w * y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Derivative of [`weighted_bce_term`] with respect to the logit `z` where
/// `p = sigmoid(z)`: `w y (p - 1) + (1 - y) p`.
pub fn bce_logit_grad(p: f64, y: f64, w: f64) -> f64 {
    w * y * (p - 1.0) + (1.0 - y) * p
}

/// Weighted multi-label cross-entropy summed over examples and classes.
pub fn weighted_bce_loss(probs: &[Vec<f64>], labels: &[&MultiHotLabel], w: &ClassWeights) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            actual: labels.len(),
        });
    }
    let mut total = 0.0;
    for (p, y) in probs.iter().zip(labels) {
        if y.len() != w.len() || p.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: y.len().max(p.len()),
            });
        }
        for (c, (&pc, &wc)) in p.iter().zip(&w.0).enumerate() {
            total += weighted_bce_term(pc, if y.get(c) { 1.0 } else { 0.0 }, wc);
        }
    }
    Ok(total)
}

/// A per-example training objective over a fixed set of feature rows.
pub trait Objective {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn features(&self, index: usize) -> &[f64];

    /// Loss of example `index` given the model's logits. When `grad` is given,
    /// the derivative of that loss with respect to each logit is written into
    /// it.
    fn example_loss(&self, index: usize, logits: &[f64], grad: Option<&mut [f64]>) -> f64;
}

/// Weighted cross-entropy against fixed (possibly soft) targets.
pub struct WeightedBce<'a> {
    features: Vec<&'a [f64]>,
    targets: Vec<Vec<f64>>,
    weights: ClassWeights,
}

impl<'a> WeightedBce<'a> {
    pub fn new(features: Vec<&'a [f64]>, targets: Vec<Vec<f64>>, weights: ClassWeights) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: targets.len(),
            });
        }
        if let Some(t) = targets.iter().find(|t| t.len() != weights.len()) {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                actual: t.len(),
            });
        }
        Ok(Self {
            features,
            targets,
            weights,
        })
    }

    pub fn from_dataset(data: &'a LabeledDataset, weights: &ClassWeights) -> Result<Self> {
        Self::new(
            data.features(),
            data.examples().iter().map(|r| r.label.to_targets()).collect(),
            weights.clone(),
        )
    }
}

impl Objective for WeightedBce<'_> {
    fn len(&self) -> usize {
        self.features.len()
    }

    fn features(&self, index: usize) -> &[f64] {
        self.features[index]
    }

    fn example_loss(&self, index: usize, logits: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let y = &self.targets[index];
        let w = self.weights.as_slice();
        let mut loss = 0.0;
        for c in 0..logits.len() {
            let p = sigmoid(logits[c]);
            loss += weighted_bce_term(p, y[c], w[c]);
            if let Some(g) = grad.as_deref_mut() {
                g[c] = bce_logit_grad(p, y[c], w[c]);
            }
        }
        loss
    }
}
