//! Backpropagation through the tanh MLP.

use super::loss::{ClassWeights, Objective, WeightedBce};
use super::{Model, Trace};
use crate::data::MultiHotLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient structure mirroring a [`Model`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Flattened in the same order as [`Model::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub(crate) fn fill(&mut self, value: f64) {
        for l in &mut self.layers {
            l.weights.fill(value);
            l.bias.fill(value);
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g *= factor);
            l.bias.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Scratch buffers reused across examples.
pub(crate) struct Workspace {
    trace: Trace,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(model: &Model) -> Self {
        Self {
            trace: Trace::new(model.config()),
            deltas: model.layers().iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }
}

/// Adds the gradient of the objective over `indices` into `grads` and returns
/// the summed loss.
pub(crate) fn accumulate(
    model: &Model,
    objective: &dyn Objective,
    indices: &[usize],
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> f64 {
    let layers = model.layers();
    let last = layers.len() - 1;
    let mut total = 0.0;
    for &idx in indices {
        model.forward_into(objective.features(idx), &mut ws.trace);
        total += objective.example_loss(idx, ws.trace.logits(), Some(&mut ws.deltas[last]));
        for k in (0..layers.len()).rev() {
            let layer = &layers[k];
            let input = &ws.trace.values[k];
            let (lower, upper) = ws.deltas.split_at_mut(k);
            let delta = &upper[0];
            let g = &mut grads.layers[k];
            for (gb, d) in g.bias.iter_mut().zip(delta) {
                *gb += d;
            }
            for (i, &a) in input.iter().enumerate() {
                let row = &mut g.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (gw, d) in row.iter_mut().zip(delta) {
                    *gw += a * d;
                }
            }
            if k > 0 {
                let prev = &mut lower[k - 1];
                for (i, &a) in input.iter().enumerate() {
                    let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                    let back: f64 = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    prev[i] = back * (1.0 - a * a);
                }
            }
        }
    }
    total
}

/// Summed loss and its analytic gradient over the given example indices.
pub fn objective_gradients(model: &Model, objective: &dyn Objective, indices: &[usize]) -> Result<(f64, Gradients)> {
    if indices.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= objective.len()) {
        return Err(Error::InvalidConfig(format!("example index {bad} out of range")));
    }
    for &i in indices {
        let x = objective.features(i);
        if x.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                actual: x.len(),
            });
        }
    }
    let mut grads = Gradients::zeros_like(model);
    let mut ws = Workspace::new(model);
    let loss = accumulate(model, objective, indices, &mut grads, &mut ws);
    Ok((loss, grads))
}

/// Gradient of the weighted multi-label cross-entropy over a batch.
pub fn loss_gradients(model: &Model, batch: &[(&[f64], &MultiHotLabel)], w: &ClassWeights) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if let Some((_, y)) = batch.iter().find(|(_, y)| y.len() != model.num_classes()) {
        return Err(Error::DimensionMismatch {
            expected: model.num_classes(),
            actual: y.len(),
        });
    }
    let objective = WeightedBce::new(
        batch.iter().map(|(x, _)| *x).collect(),
        batch.iter().map(|(_, y)| y.to_targets()).collect(),
        w.clone(),
    )?;
    let indices: Vec<usize> = (0..batch.len()).collect();
    Ok(objective_gradients(model, &objective, &indices)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{init_model, sigmoid, ModelConfig};
    use crate::seed;
    use rand::Rng;

    /// Central finite differences of the summed objective.
    fn finite_differences(model: &Model, objective: &dyn Objective, indices: &[usize], h: f64) -> Vec<f64> {
        let base = model.parameters();
        let mut probe = model.clone();
        let loss = |m: &Model| -> f64 {
            indices
                .iter()
                .map(|&i| objective.example_loss(i, &m.forward(objective.features(i)).unwrap(), None))
                .sum()
        };
        (0..base.len())
            .map(|k| {
                let mut p = base.clone();
                p[k] = base[k] + h;
                probe.set_parameters(&p).unwrap();
                let up = loss(&probe);
                p[k] = base[k] - h;
                probe.set_parameters(&p).unwrap();
                let down = loss(&probe);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn single_linear_unit_bias_gradient() {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden: vec![],
            num_classes: 1,
            seed: 1,
        };
        let model = init_model(&cfg).unwrap();
        let x = [0.4, -1.2];
        let w = ClassWeights::new(vec![3.0]).unwrap();
        for y in [true, false] {
            let label = MultiHotLabel::new(vec![y]);
            let g = loss_gradients(&model, &[(&x, &label)], &w).unwrap();
            let f = sigmoid(model.forward(&x).unwrap()[0]);
            let yv = if y { 1.0 } else { 0.0 };
            let expected = 3.0 * yv * (f - 1.0) + (1.0 - yv) * f;
            assert!((g.layers[0].bias[0] - expected).abs() < 1e-12);
            assert!((g.layers[0].weights[1] - expected * x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = seed::rng(2024);
        for trial in 0..10 {
            let cfg = ModelConfig {
                input_dim: rng.random_range(1..5),
                hidden: (0..rng.random_range(0..3)).map(|_| rng.random_range(1..8)).collect(),
                num_classes: rng.random_range(1..4),
                seed: trial,
            };
            let model = init_model(&cfg).unwrap();
            let xs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..cfg.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<MultiHotLabel> = (0..4)
                .map(|_| MultiHotLabel::new((0..cfg.num_classes).map(|_| rng.random_bool(0.5)).collect()))
                .collect();
            let w = ClassWeights::new((0..cfg.num_classes).map(|_| rng.random_range(0.5..4.0)).collect()).unwrap();
            let objective = WeightedBce::new(
                xs.iter().map(|x| x.as_slice()).collect(),
                labels.iter().map(|l| l.to_targets()).collect(),
                w,
            )
            .unwrap();
            let idx = [0, 1, 2, 3];
            let (_, g) = objective_gradients(&model, &objective, &idx).unwrap();
            let fd = finite_differences(&model, &objective, &idx, 1e-5);
            for (a, n) in g.flatten().iter().zip(&fd) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                assert!(rel < 1e-4, "analytic {a} vs numeric {n}");
            }
        }
    }

    #[test]
    fn batch_gradient_is_sum_of_singles() {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden: vec![4],
            num_classes: 2,
            seed: 5,
        };
        let model = init_model(&cfg).unwrap();
        let (xa, xb) = ([0.1, 0.2, -0.3], [1.0, -1.0, 0.5]);
        let (ya, yb) = (MultiHotLabel::new(vec![true, false]), MultiHotLabel::new(vec![true, true]));
        let w = ClassWeights::new(vec![2.0, 1.0]).unwrap();
        let both = loss_gradients(&model, &[(&xa, &ya), (&xb, &yb)], &w).unwrap().flatten();
        let a = loss_gradients(&model, &[(&xa, &ya)], &w).unwrap().flatten();
        let b = loss_gradients(&model, &[(&xb, &yb)], &w).unwrap().flatten();
        for k in 0..both.len() {
            assert!((both[k] - (a[k] + b[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let cfg = ModelConfig {
            input_dim: 1,
            hidden: vec![],
            num_classes: 1,
            seed: 0,
        };
        let model = init_model(&cfg).unwrap();
        assert!(matches!(
            loss_gradients(&model, &[], &ClassWeights::uniform(1)),
            Err(Error::Empty(_))
        ));
    }
}
