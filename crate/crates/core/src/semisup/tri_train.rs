use serde::{Deserialize, Serialize};

use super::{augment, fit, score_pool, select_top_k, PseudoLabelCandidate, ThetaPolicy, WeightPolicy};
use crate::data::{bootstrap_sample, LabeledDataset, MultiHotLabel, UnlabeledPool};
use crate::learner::{Model, ModelConfig, TrainParams};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriTrainParams {
    pub model: ModelConfig,
    pub k: usize,
    pub iterations: usize,
    pub theta: ThetaPolicy,
    pub train: TrainParams,
    pub bootstrap_seeds: [u64; 3],
    pub weights: WeightPolicy,
}

impl TriTrainParams {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            k: 5000,
            iterations: 1,
            theta: ThetaPolicy::default(),
            train: TrainParams::default(),
            bootstrap_seeds: [1, 2, 3],
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

    /// Model and training seeds of model `i` at iteration `t`.
    fn seeds(&self, i: usize, t: usize) -> (ModelConfig, TrainParams) {
        let offset = t as u64;
        let m = seed::derive(self.model.seed, i as u64).wrapping_add(offset);
        let s = seed::derive(self.train.seed, i as u64).wrapping_add(offset);
        (self.model.with_seed(m), self.train.with_seed(s))
    }
}

#[derive(Debug, Clone)]
pub struct TriTrainResult {
    /// `models[t][i]` is model `i` after iteration `t`; `models[0]` holds the
    /// bootstrap-only models.
    pub models: Vec<Vec<Model>>,
    /// Bootstrap replica each model index was trained on.
    pub replicas: Vec<LabeledDataset>,
    /// Thresholds used at each iteration (index `t - 1`).
    pub thresholds: Vec<Vec<f64>>,
    /// Every selection, in iteration / target model / class / rank order.
    pub candidates: Vec<PseudoLabelCandidate>,
}

impl TriTrainResult {
    pub fn initial(&self) -> &[Model] {
        &self.models[0]
    }

    pub fn final_models(&self) -> &[Model] {
        self.models.last().unwrap()
    }

    /// The six-model ensemble: final models followed by initial models.
    pub fn ensemble_members(&self) -> Vec<Model> {
        self.final_models().iter().chain(self.initial()).cloned().collect()
    }

    /// Selections for `target` made at iterations `1..=t`.
    pub fn candidates_for(&self, target: usize, t: usize) -> Vec<PseudoLabelCandidate> {
        self.candidates
            .iter()
            .filter(|c| c.target_model == Some(target) && c.iteration <= t)
            .cloned()
            .collect()
    }

    /// The training set model `target` was fitted on at iteration `t`.
    pub fn training_set(&self, target: usize, t: usize, pool: &UnlabeledPool) -> Result<LabeledDataset> {
        augment(&self.replicas[target], pool, &self.candidates_for(target, t))
    }
}

fn peers(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Candidates for one target model from its two peers' probabilities.
///
/// For class `c`, example `x` qualifies iff both peers give it a probability
/// strictly above `theta[c]`; its score is the mean of the two. The top `k`
/// per class are kept. The assigned label sets `c` and every other class on
/// which both peers also clear the threshold.
pub fn tri_candidates(
    pool: &UnlabeledPool,
    peer_a: &[Vec<f64>],
    peer_b: &[Vec<f64>],
    theta: &[f64],
    k: usize,
    iteration: usize,
    target: usize,
) -> Vec<PseudoLabelCandidate> {
    let gate = |x: usize, c: usize| peer_a[x][c] > theta[c] && peer_b[x][c] > theta[c];
    let mut out = Vec::new();
    for c in 0..theta.len() {
        let per_class = (0..pool.len())
            .filter(|&x| gate(x, c))
            .map(|x| PseudoLabelCandidate {
                example_id: pool.examples()[x].id.clone(),
                class: c,
                score: (peer_a[x][c] + peer_b[x][c]) / 2.0,
                assigned_label: MultiHotLabel::new((0..theta.len()).map(|c2| gate(x, c2)).collect()),
                iteration,
                target_model: Some(target),
            })
            .collect();
        out.extend(select_top_k(per_class, k));
    }
    out
}

/// Ensemble-based tri-training.
///
/// Three models are fitted on bootstrap replicas of the labeled set. At each
/// iteration every model receives the top-`k` per class of the pool examples
/// its two peers (from the previous iteration) agree on, and is refitted from
/// scratch on its replica plus all selections it has received so far. The
/// pool is rescanned in full every iteration.
pub fn tri_train(
    labeled: &LabeledDataset,
    pool: &UnlabeledPool,
    params: &TriTrainParams,
    dev: Option<&LabeledDataset>,
) -> Result<TriTrainResult> {
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

    let replicas = params
        .bootstrap_seeds
        .iter()
        .map(|&s| bootstrap_sample(labeled, s))
        .collect::<Result<Vec<_>>>()?;
    let initial = replicas
        .iter()
        .enumerate()
        .map(|(i, data)| {
            let (cfg, tp) = params.seeds(i, 0);
            fit(data, &cfg, &tp, params.weights, dev)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut models = vec![initial];
    let mut thresholds = Vec::new();
    let mut candidates: Vec<PseudoLabelCandidate> = Vec::new();
    let mut received: Vec<Vec<PseudoLabelCandidate>> = vec![Vec::new(); 3];
    for t in 1..=params.iterations {
        let prev = &models[t - 1];
        let probs = score_pool(&prev.iter().collect::<Vec<_>>(), pool)?;
        let theta = params.theta.resolve(c_total, prev, dev)?;
        let mut next = Vec::with_capacity(3);
        for i in 0..3 {
            let (j, h) = peers(i);
            let selected = tri_candidates(pool, &probs[j], &probs[h], &theta, params.k, t, i);
            received[i].extend(selected.iter().cloned());
            candidates.extend(selected);
            let data = augment(&replicas[i], pool, &received[i])?;
            let (cfg, tp) = params.seeds(i, t);
            next.push(fit(&data, &cfg, &tp, params.weights, dev)?);
        }
        thresholds.push(theta);
        models.push(next);
    }
    Ok(TriTrainResult {
        models,
        replicas,
        thresholds,
        candidates,
    })
}
