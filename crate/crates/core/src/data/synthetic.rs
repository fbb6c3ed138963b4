//! Synthetic multi-label benchmark with a domain-shifted unlabeled pool.
//!
//! Every example is a sum of independent diagonal Gaussians: one background
//! draw plus one draw per active event, each event picking one of its mixture
//! components uniformly. Labeled examples come in fixed per-event counts
//! (each positive example is "about" one primary event, other events
//! co-occur independently at `co_occurrence`) plus `negative_count`
//! background-only rows. The pool draws its primary event from the labeled
//! class proportions rescaled by `pool_prior_factor`, and shifts every
//! component mean by the event's `pool_shift` (background by
//! `pool_background_shift`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Example, LabeledDataset, LabeledExample, MultiHotLabel, UnlabeledPool};
use crate::{seed, Error, Result};

/// Gaussian with diagonal covariance `diag(std^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Component {
    fn validate(&self, dim: usize, what: &str) -> Result<()> {
        if self.mean.len() != dim || self.std.len() != dim {
            return Err(Error::InvalidConfig(format!("{what}: component width must be {dim}")));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(format!("{what}: non-finite mean")));
        }
        if self.std.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{what}: covariance must be positive definite"
            )));
        }
        Ok(())
    }

    fn add_sample(&self, shift: Option<&[f64]>, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for k in 0..out.len() {
            let z: f64 = StandardNormal.sample(rng);
            let offset = shift.map_or(0.0, |s| s[k]);
            out[k] += self.mean[k] + offset + self.std[k] * z;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    pub positive_count: usize,
    pub components: Vec<Component>,
    pub pool_shift: Vec<f64>,
    pub pool_prior_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub events: Vec<EventSpec>,
    pub negative_count: usize,
    pub background: Component,
    pub co_occurrence: f64,
    pub pool_size: usize,
    pub pool_background_shift: Vec<f64>,
    pub seed: u64,
}

pub struct SyntheticData {
    pub labeled: LabeledDataset,
    pub pool: UnlabeledPool,
    /// Ground truth for the pool, index-aligned with `pool`. Diagnostics only.
    pub pool_truth: Vec<MultiHotLabel>,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if self.events.is_empty() {
            return Err(Error::InvalidConfig("at least one event is required".into()));
        }
        if !(0.0..=1.0).contains(&self.co_occurrence) {
            return Err(Error::InvalidConfig("co_occurrence must lie in [0, 1]".into()));
        }
        self.background.validate(d, "background")?;
        if self.pool_background_shift.len() != d {
            return Err(Error::InvalidConfig(format!("pool_background_shift must have width {d}")));
        }
        for ev in &self.events {
            if ev.name.is_empty() || ev.name.contains(',') {
                return Err(Error::InvalidConfig(format!("invalid event name `{}`", ev.name)));
            }
            if ev.components.is_empty() {
                return Err(Error::InvalidConfig(format!("{}: no components", ev.name)));
            }
            for comp in &ev.components {
                comp.validate(d, &ev.name)?;
            }
            if ev.pool_shift.len() != d {
                return Err(Error::InvalidConfig(format!("{}: pool_shift must have width {d}", ev.name)));
            }
            if !ev.pool_prior_factor.is_finite() || ev.pool_prior_factor < 0.0 {
                return Err(Error::InvalidConfig(format!("{}: pool_prior_factor must be >= 0", ev.name)));
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        self.events.iter().map(|e| e.name.clone()).collect()
    }

    /// Categorical weights of the pool's primary draw: events then negatives.
    fn pool_weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .events
            .iter()
            .map(|e| e.positive_count as f64 * e.pool_prior_factor)
            .collect();
        w.push(self.negative_count as f64);
        w
    }

    /// Probability that each event is active on a pool example.
    pub fn expected_pool_rates(&self) -> Vec<f64> {
        let w = self.pool_weights();
        let total: f64 = w.iter().sum();
        let primary: Vec<f64> = w.iter().map(|v| v / total).collect();
        let any_event: f64 = primary[..self.events.len()].iter().sum();
        (0..self.events.len())
            .map(|c| primary[c] + (any_event - primary[c]) * self.co_occurrence)
            .collect()
    }

    /// Three-event benchmark with heavy class imbalance and per-event pool
    /// shift of increasing size (gunshot small, dog medium, baby_cry large).
    ///
    /// The event geometry is fixed; `seed` only drives sampling.
    pub fn benchmark(seed: u64) -> Self {
        const DIM: usize = 20;
        let mut world = seed::rng(0x005e_ed0f_3ce7);
        let mut direction = |norm: f64| -> Vec<f64> {
            let v: Vec<f64> = (0..DIM).map(|_| StandardNormal.sample(&mut world)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * norm / len).collect()
        };
        // (name, component separation, shift magnitude, prior factor)
        let layout = [
            ("dog", 2.6, 1.0, 0.8),
            ("baby_cry", 2.6, 2.0, 0.5),
            ("gunshot", 2.6, 0.3, 1.0),
        ];
        let events = layout
            .iter()
            .map(|&(name, sep, shift, prior)| EventSpec {
                name: name.to_string(),
                positive_count: 300,
                components: (0..2)
                    .map(|_| Component {
                        mean: direction(sep),
                        std: vec![0.8; DIM],
                    })
                    .collect(),
                pool_shift: direction(shift),
                pool_prior_factor: prior,
            })
            .collect();
        Self {
            dim: DIM,
            events,
            negative_count: 3600,
            background: Component {
                mean: vec![0.0; DIM],
                std: vec![1.0; DIM],
            },
            co_occurrence: 0.05,
            pool_size: 20_000,
            pool_background_shift: vec![0.0; DIM],
            seed,
        }
    }
}

struct Sampler<'a> {
    config: &'a SyntheticConfig,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn label(&mut self, primary: Option<usize>) -> MultiHotLabel {
        let c_total = self.config.events.len();
        let mut label = MultiHotLabel::zeros(c_total);
        if let Some(p) = primary {
            for c in 0..c_total {
                let on = c == p || self.rng.random::<f64>() < self.config.co_occurrence;
                label.set(c, on);
            }
        }
        label
    }

    fn features(&mut self, label: &MultiHotLabel, in_pool: bool) -> Vec<f64> {
        let cfg = self.config;
        let mut x = vec![0.0; cfg.dim];
        let bg_shift = in_pool.then_some(cfg.pool_background_shift.as_slice());
        cfg.background.add_sample(bg_shift, &mut self.rng, &mut x);
        for (c, ev) in cfg.events.iter().enumerate() {
            if label.get(c) {
                let k = self.rng.random_range(0..ev.components.len());
                let shift = in_pool.then_some(ev.pool_shift.as_slice());
                ev.components[k].add_sample(shift, &mut self.rng, &mut x);
            }
        }
        x
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let mut sampler = Sampler {
        config,
        rng: seed::rng(config.seed),
    };

    let mut rows = Vec::new();
    let primaries = config
        .events
        .iter()
        .enumerate()
        .flat_map(|(c, ev)| std::iter::repeat_n(Some(c), ev.positive_count))
        .chain(std::iter::repeat_n(None, config.negative_count));
    for (i, primary) in primaries.enumerate() {
        let label = sampler.label(primary);
        let features = sampler.features(&label, false);
        rows.push(LabeledExample {
            example: Example::new(format!("L{i:06}"), features),
            label,
            replica: 0,
        });
    }
    let labeled = LabeledDataset::new(config.dim, config.class_names(), rows)?;

    let mut pool_rows = Vec::with_capacity(config.pool_size);
    let mut truth = Vec::with_capacity(config.pool_size);
    let weights = config.pool_weights();
    if config.pool_size > 0 {
        let categorical = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidConfig(format!("pool priors: {e}")))?;
        for i in 0..config.pool_size {
            let draw = categorical.sample(&mut sampler.rng);
            let primary = (draw < config.events.len()).then_some(draw);
            let label = sampler.label(primary);
            let features = sampler.features(&label, true);
            pool_rows.push(Example::new(format!("U{i:06}"), features));
            truth.push(label);
        }
    }
    let pool = UnlabeledPool::new(config.dim, pool_rows)?;
    Ok(SyntheticData {
        labeled,
        pool,
        pool_truth: truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        let mut cfg = SyntheticConfig::benchmark(seed);
        cfg.pool_size = 500;
        cfg
    }

    #[test]
    fn benchmark_is_heavily_imbalanced() {
        let data = generate_synthetic(&small(1)).unwrap();
        let n = data.labeled.len();
        for pos in data.labeled.positive_counts() {
            let ratio = (n - pos) as f64 / pos as f64;
            assert!(ratio > 10.0, "negative:positive ratio {ratio}");
        }
    }

    #[test]
    fn invalid_covariance_is_rejected() {
        let mut cfg = small(1);
        cfg.events[0].components[0].std[3] = 0.0;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic(&small(3)).unwrap();
        let b = generate_synthetic(&small(3)).unwrap();
        assert_eq!(a.labeled, b.labeled);
        assert_eq!(a.pool, b.pool);
        let c = generate_synthetic(&small(4)).unwrap();
        assert_ne!(a.pool, c.pool);
    }

    #[test]
    fn pool_event_rates_match_priors() {
        let mut cfg = SyntheticConfig::benchmark(8);
        cfg.pool_size = 10_000;
        let data = generate_synthetic(&cfg).unwrap();
        let expected = cfg.expected_pool_rates();
        let n = data.pool_truth.len() as f64;
        for (c, p) in expected.iter().enumerate() {
            let observed = data.pool_truth.iter().filter(|l| l.get(c)).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((observed - p).abs() < 3.0 * se, "event {c}: {observed} vs {p}");
        }
    }

    #[test]
    fn unshifted_pool_matches_labeled_law() {
        // With zero shift and unit prior factors the pool is drawn from the
        // labeled source distribution; compare first and second moments of
        // the negatives and the event rates.
        let mut cfg = SyntheticConfig::benchmark(2);
        for ev in &mut cfg.events {
            ev.pool_shift = vec![0.0; cfg.dim];
            ev.pool_prior_factor = 1.0;
        }
        cfg.pool_size = 20_000;
        let data = generate_synthetic(&cfg).unwrap();
        let n_lab = data.labeled.len() as f64;
        let lab_rates: Vec<f64> = data
            .labeled
            .positive_counts()
            .iter()
            .map(|&p| p as f64 / n_lab)
            .collect();
        let n_pool = data.pool.len() as f64;
        for (c, r) in lab_rates.iter().enumerate() {
            let pool_rate = data.pool_truth.iter().filter(|l| l.get(c)).count() as f64 / n_pool;
            let se = (r * (1.0 - r) / n_pool).sqrt() + (r * (1.0 - r) / n_lab).sqrt();
            assert!((pool_rate - r).abs() < 3.0 * se, "event {c}: {pool_rate} vs {r}");
        }
        let mean0 = |rows: Vec<&[f64]>| rows.iter().map(|x| x[0]).sum::<f64>() / rows.len() as f64;
        let lab_neg: Vec<&[f64]> = data
            .labeled
            .examples()
            .iter()
            .filter(|r| r.label.is_negative())
            .map(|r| r.example.features.as_slice())
            .collect();
        let pool_neg: Vec<&[f64]> = data
            .pool
            .examples()
            .iter()
            .zip(&data.pool_truth)
            .filter(|(_, l)| l.is_negative())
            .map(|(e, _)| e.features.as_slice())
            .collect();
        assert!((mean0(lab_neg) - mean0(pool_neg)).abs() < 0.08);
    }

    #[test]
    fn shift_translates_pool_events() {
        let mut cfg = SyntheticConfig::benchmark(5);
        cfg.co_occurrence = 0.0;
        cfg.pool_size = 8000;
        cfg.events[0].pool_shift = vec![5.0; cfg.dim];
        let data = generate_synthetic(&cfg).unwrap();
        let mean = |rows: &[&[f64]]| rows.iter().map(|x| x[0]).sum::<f64>() / rows.len() as f64;
        let lab: Vec<&[f64]> = data
            .labeled
            .examples()
            .iter()
            .filter(|r| r.label.get(0))
            .map(|r| r.example.features.as_slice())
            .collect();
        let pool: Vec<&[f64]> = data
            .pool
            .examples()
            .iter()
            .zip(&data.pool_truth)
            .filter(|(_, l)| l.get(0))
            .map(|(e, _)| e.features.as_slice())
            .collect();
        assert!((mean(&pool) - mean(&lab) - 5.0).abs() < 0.4);
    }
}
