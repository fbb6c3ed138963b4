use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::data::LabeledDataset;
use crate::learner::{
    bce_logit_grad, init_model, sigmoid, sigmoid_t, train_objective, weighted_bce_term, ClassWeights, Model,
    ModelConfig, Objective, TrainParams,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillParams {
    /// Weight of the soft (teacher) term; `1 - alpha` goes to the hard term.
    pub alpha: f64,
    pub temperature: f64,
    /// Scale the student logits by `1 / T` inside the soft term as well.
    pub student_temperature: bool,
    pub student: ModelConfig,
    pub train: TrainParams,
}

impl DistillParams {
    pub fn new(student: ModelConfig) -> Self {
        Self {
            alpha: 0.5,
            temperature: 2.0,
            student_temperature: true,
            student,
            train: TrainParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        self.student.validate()?;
        self.train.validate()
    }
}

/// Unweighted sums of the two distillation terms. The combined loss is
/// `alpha * T^2 * soft + (1 - alpha) * hard`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KdLossParts {
    pub soft: f64,
    pub hard: f64,
}

impl KdLossParts {
    pub fn combine(&self, alpha: f64, temperature: f64) -> f64 {
        alpha * temperature * temperature * self.soft + (1.0 - alpha) * self.hard
    }
}

/// Distillation objective over precomputed teacher logits.
///
/// The soft term is the weighted cross-entropy between the teacher's
/// tempered probabilities `sigmoid(z_t / T)` and the student's (tempered)
/// probabilities; `w_c` multiplies the teacher's soft positive mass. The hard
/// term is the weighted cross-entropy against the true labels at `T = 1`.
pub struct KdObjective<'a> {
    features: Vec<&'a [f64]>,
    soft_targets: Vec<Vec<f64>>,
    hard_targets: Vec<Vec<f64>>,
    weights: ClassWeights,
    alpha: f64,
    temperature: f64,
    student_temperature: bool,
}

impl<'a> KdObjective<'a> {
    pub fn new(
        data: &'a LabeledDataset,
        teacher_logits: &[Vec<f64>],
        weights: &ClassWeights,
        alpha: f64,
        temperature: f64,
        student_temperature: bool,
    ) -> Result<Self> {
        if teacher_logits.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                actual: teacher_logits.len(),
            });
        }
        let c = data.num_classes();
        if weights.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: weights.len(),
            });
        }
        if let Some(z) = teacher_logits.iter().find(|z| z.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: z.len(),
            });
        }
        if teacher_logits.iter().flatten().any(|z| z.is_nan()) {
            return Err(Error::InvalidConfig("teacher logits contain NaN".into()));
        }
        Ok(Self {
            features: data.features(),
            soft_targets: teacher_logits
                .iter()
                .map(|z| z.iter().map(|&v| sigmoid_t(v, temperature)).collect())
                .collect(),
            hard_targets: data.examples().iter().map(|r| r.label.to_targets()).collect(),
            weights: weights.clone(),
            alpha,
            temperature,
            student_temperature,
        })
    }

    fn student_soft(&self, z: f64) -> f64 {
        if self.student_temperature {
            sigmoid_t(z, self.temperature)
        } else {
            sigmoid(z)
        }
    }

    /// Both terms for one example given the student's logits.
    pub fn parts(&self, index: usize, logits: &[f64]) -> KdLossParts {
        let w = self.weights.as_slice();
        let mut parts = KdLossParts::default();
        for c in 0..logits.len() {
            parts.soft += weighted_bce_term(self.student_soft(logits[c]), self.soft_targets[index][c], w[c]);
            parts.hard += weighted_bce_term(sigmoid(logits[c]), self.hard_targets[index][c], w[c]);
        }
        parts
    }
}

impl Objective for KdObjective<'_> {
    fn len(&self) -> usize {
        self.features.len()
    }

    fn features(&self, index: usize) -> &[f64] {
        self.features[index]
    }

    fn example_loss(&self, index: usize, logits: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (a, t) = (self.alpha, self.temperature);
        if let Some(g) = grad {
            let w = self.weights.as_slice();
            // d q / d z carries 1 / T when the student is tempered.
            let chain = if self.student_temperature { 1.0 / t } else { 1.0 };
            for c in 0..logits.len() {
                let q = self.student_soft(logits[c]);
                let p = sigmoid(logits[c]);
                g[c] = a * t * t * chain * bce_logit_grad(q, self.soft_targets[index][c], w[c])
                    + (1.0 - a) * bce_logit_grad(p, self.hard_targets[index][c], w[c]);
            }
        }
        self.parts(index, logits).combine(a, t)
    }
}

/// Total distillation loss of `student` over `data` and its summed parts.
pub fn kd_loss(student: &Model, objective: &KdObjective<'_>) -> Result<(f64, KdLossParts)> {
    let mut total = 0.0;
    let mut sum = KdLossParts::default();
    for i in 0..objective.len() {
        let z = student.forward(objective.features(i))?;
        let p = objective.parts(i, &z);
        total += p.combine(objective.alpha, objective.temperature);
        sum.soft += p.soft;
        sum.hard += p.hard;
    }
    Ok((total, sum))
}

/// Train a fresh student against the ensemble's logits on `labeled`.
pub fn distill(
    teacher: &Ensemble,
    labeled: &LabeledDataset,
    weights: &ClassWeights,
    params: &DistillParams,
    dev: Option<&LabeledDataset>,
) -> Result<Model> {
    params.validate()?;
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    let teacher_logits = teacher.logits_many(&labeled.features())?;
    distill_from_logits(&teacher_logits, labeled, weights, params, dev)
}

/// As [`distill`], with teacher logits supplied (for example from a cache).
pub fn distill_from_logits(
    teacher_logits: &[Vec<f64>],
    labeled: &LabeledDataset,
    weights: &ClassWeights,
    params: &DistillParams,
    dev: Option<&LabeledDataset>,
) -> Result<Model> {
    params.validate()?;
    let objective = KdObjective::new(
        labeled,
        teacher_logits,
        weights,
        params.alpha,
        params.temperature,
        params.student_temperature,
    )?;
    let student = init_model(&params.student)?;
    train_objective(&student, &objective, &params.train, dev)
}
