//! Dense feed-forward learner with per-class sigmoid outputs.
//!
//! Hidden layers use `tanh`; the output layer is linear and produces one
//! logit per event. Weights are stored row-major with shape
//! `(in_dim, out_dim)`, so row `i` holds the outgoing weights of input `i`.

mod adam;
mod checkpoint;
mod grad;
mod loss;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use grad::{loss_gradients, objective_gradients, Gradients, LayerGradients};
pub use loss::{
    bce_logit_grad, clamp_prob, logit, sigmoid, sigmoid_t, weighted_bce_loss, weighted_bce_term,
    ClassWeights, Objective, WeightedBce, PROB_CLAMP,
};
pub use train::{train, train_objective, EarlyStop, TrainParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// `(in_dim, out_dim)` of every layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases, drawn from `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let layers = config
        .layer_shapes()
        .into_iter()
        .map(|(i, o)| {
            let limit = (6.0 / (i + o) as f64).sqrt();
            let mut layer = Layer::zeros(i, o);
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
            layer
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        layers,
    })
}

/// Per-layer outputs of one forward pass; `values[0]` is the input, the last
/// entry the logits. Hidden entries hold post-activation values.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(config: &ModelConfig) -> Self {
        let mut values = vec![vec![0.0; config.input_dim]];
        values.extend(config.layer_shapes().iter().map(|&(_, o)| vec![0.0; o]));
        Self { values }
    }

    pub fn logits(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

impl Model {
    /// Builds a model from explicit layers, checking them against `config`.
    pub fn from_layers(config: ModelConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} layers, found {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (k, (layer, &(i, o))) in layers.iter().zip(&shapes).enumerate() {
            if layer.in_dim != i
                || layer.out_dim != o
                || layer.weights.len() != i * o
                || layer.bias.len() != o
            {
                return Err(Error::InvalidConfig(format!("layer {k} does not have shape {i}x{o}")));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened as `w0, b0, w1, b1, ...`.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch {
                expected: self.num_parameters(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, x: &[f64], trace: &mut Trace) {
        trace.values[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = trace.values.split_at_mut(k + 1);
            let out = &mut tail[0];
            layer.affine(&head[k], out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    /// Logits for one example.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut trace = Trace::new(&self.config);
        self.forward_into(x, &mut trace);
        Ok(trace.logits().to_vec())
    }

    /// Logits for many examples, reusing one buffer.
    pub fn forward_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let mut trace = Trace::new(&self.config);
        xs.iter()
            .map(|x| {
                self.check_input(x)?;
                self.forward_into(x, &mut trace);
                Ok(trace.logits().to_vec())
            })
            .collect()
    }
}

/// Anything that maps a feature row to per-class probabilities.
pub trait Predictor {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict_proba_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.predict_proba(x)).collect()
    }
}

impl Predictor for Model {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.into_iter().map(sigmoid).collect())
    }

    fn predict_proba_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .forward_many(xs)?
            .into_iter()
            .map(|z| z.into_iter().map(sigmoid).collect())
            .collect())
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::Rng;

    fn config(hidden: Vec<usize>) -> ModelConfig {
        ModelConfig {
            input_dim: 4,
            hidden,
            num_classes: 3,
            seed: 7,
        }
    }

    #[test]
    fn layer_shapes() {
        let m = init_model(&config(vec![8])).unwrap();
        let shapes: Vec<(usize, usize, usize)> = m
            .layers()
            .iter()
            .map(|l| (l.weights.len(), l.in_dim, l.bias.len()))
            .collect();
        assert_eq!(shapes, vec![(32, 4, 8), (24, 8, 3)]);
    }

    #[test]
    fn no_hidden_layers_is_linear() {
        let m = init_model(&config(vec![])).unwrap();
        assert_eq!(m.layers().len(), 1);
        assert_eq!((m.layers()[0].in_dim, m.layers()[0].out_dim), (4, 3));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(&config(vec![8, 5])).unwrap();
        let b = init_model(&config(vec![8, 5])).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        let c = init_model(&config(vec![8, 5]).with_seed(8)).unwrap();
        assert_ne!(a.parameters(), c.parameters());
    }

    #[test]
    fn invalid_configs() {
        let mut c = config(vec![0]);
        assert!(init_model(&c).is_err());
        c.hidden = vec![];
        c.num_classes = 0;
        assert!(init_model(&c).is_err());
        c.num_classes = 1;
        c.input_dim = 0;
        assert!(init_model(&c).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let mut m = init_model(&config(vec![6])).unwrap();
        m.set_parameters(&vec![0.0; m.num_parameters()]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn unit_input_selects_first_row() {
        let m = init_model(&config(vec![])).unwrap();
        let mut m = m;
        m.layers[0].bias = vec![0.1, 0.2, 0.3];
        let z = m.forward(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let l = &m.layers()[0];
        for j in 0..3 {
            assert_eq!(z[j], l.weights[j] + l.bias[j]);
        }
    }

    #[test]
    fn forward_matches_matrix_product_oracle() {
        let mut rng = seed::rng(99);
        for trial in 0..20 {
            let cfg = ModelConfig {
                input_dim: rng.random_range(1..6),
                hidden: (0..rng.random_range(0..3)).map(|_| rng.random_range(1..7)).collect(),
                num_classes: rng.random_range(1..4),
                seed: trial,
            };
            let m = init_model(&cfg).unwrap();
            let x: Vec<f64> = (0..cfg.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Straight-line evaluation: a_j = sum_i a_i * W[i][j] + b_j.
            let mut a = x.clone();
            let n = m.layers().len();
            for (k, l) in m.layers().iter().enumerate() {
                let mut next = Vec::with_capacity(l.out_dim);
                for j in 0..l.out_dim {
                    let mut s = l.bias[j];
                    for i in 0..l.in_dim {
                        s += a[i] * l.weights[i * l.out_dim + j];
                    }
                    next.push(if k + 1 < n { s.tanh() } else { s });
                }
                a = next;
            }
            let z = m.forward(&x).unwrap();
            for (p, q) in z.iter().zip(&a) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = init_model(&config(vec![])).unwrap();
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 4, actual: 1 })
        ));
    }

    #[test]
    fn from_layers_checks_shapes() {
        let cfg = config(vec![]);
        assert!(Model::from_layers(cfg.clone(), vec![Layer::zeros(4, 3)]).is_ok());
        assert!(Model::from_layers(cfg, vec![Layer::zeros(3, 4)]).is_err());
    }
}
