//! Global mean and variance normalisation (CMVN analog).

use serde::{Deserialize, Serialize};

use super::{Example, LabeledDataset, UnlabeledPool};
use crate::{Error, Result};

/// Lower bound on a per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-dimension mean and population standard deviation over every labeled
/// example.
pub fn compute_norm_stats(data: &LabeledDataset) -> Result<NormStats> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = data.len() as f64;
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for row in data.examples() {
        for (m, x) in mean.iter_mut().zip(&row.example.features) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in data.examples() {
        for ((v, x), m) in var.iter_mut().zip(&row.example.features).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: dim,
            });
        }
        Ok(())
    }

    pub fn apply_row(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert_row(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    fn map_example(&self, ex: &Example, f: impl Fn(&Self, &[f64]) -> Vec<f64>) -> Example {
        Example {
            id: ex.id.clone(),
            features: f(self, &ex.features),
        }
    }

    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        self.check(data.dim())?;
        let rows = data
            .examples()
            .iter()
            .map(|row| super::LabeledExample {
                example: self.map_example(&row.example, Self::apply_row),
                label: row.label.clone(),
                replica: row.replica,
            })
            .collect();
        data.with_examples(rows)
    }

    pub fn apply_pool(&self, pool: &UnlabeledPool) -> Result<UnlabeledPool> {
        self.check(pool.dim())?;
        let rows = pool
            .examples()
            .iter()
            .map(|ex| self.map_example(ex, Self::apply_row))
            .collect();
        UnlabeledPool::new(pool.dim(), rows)
    }

    pub fn invert(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        self.check(data.dim())?;
        let rows = data
            .examples()
            .iter()
            .map(|row| super::LabeledExample {
                example: self.map_example(&row.example, Self::invert_row),
                label: row.label.clone(),
                replica: row.replica,
            })
            .collect();
        data.with_examples(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, LabeledExample, MultiHotLabel};
    use proptest::prelude::*;

    fn dataset(rows: &[Vec<f64>]) -> LabeledDataset {
        let d = rows[0].len();
        let examples = rows
            .iter()
            .enumerate()
            .map(|(i, r)| LabeledExample {
                example: Example::new(format!("e{i}"), r.clone()),
                label: MultiHotLabel::new(vec![i % 2 == 0]),
                replica: 0,
            })
            .collect();
        LabeledDataset::new(d, vec!["a".into()], examples).unwrap()
    }

    #[test]
    fn two_point_hand_example() {
        let ds = dataset(&[vec![0.0], vec![2.0]]);
        let stats = compute_norm_stats(&ds).unwrap();
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
        let normed = stats.apply(&ds).unwrap();
        assert_eq!(normed.examples()[0].example.features, vec![-1.0]);
        assert_eq!(normed.examples()[1].example.features, vec![1.0]);
    }

    #[test]
    fn constant_column_is_floored() {
        let ds = dataset(&[vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 4.0]]);
        let stats = compute_norm_stats(&ds).unwrap();
        assert_eq!(stats.std[0], STD_FLOOR);
        let normed = stats.apply(&ds).unwrap();
        assert!(normed.examples().iter().all(|r| r.example.features[0] == 0.0));
    }

    #[test]
    fn standardized_data_is_a_fixed_point() {
        let ds = dataset(&[vec![-1.0], vec![1.0], vec![-1.0], vec![1.0]]);
        let stats = compute_norm_stats(&ds).unwrap();
        assert!((stats.mean[0]).abs() < 1e-12);
        assert!((stats.std[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = LabeledDataset::new(1, vec!["a".into()], vec![]).unwrap();
        assert!(matches!(compute_norm_stats(&ds), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn normalised_set_is_standardised_and_invertible(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..40)
        ) {
            let ds = dataset(&rows);
            let stats = compute_norm_stats(&ds).unwrap();
            let normed = stats.apply(&ds).unwrap();
            let again = compute_norm_stats(&normed).unwrap();
            for (k, (&m, &s)) in again.mean.iter().zip(&again.std).enumerate() {
                prop_assert!(m.abs() < 1e-9);
                if stats.std[k] > 1e-6 {
                    prop_assert!((s - 1.0).abs() < 1e-9);
                }
            }
            let back = stats.invert(&normed).unwrap();
            for (a, b) in back.examples().iter().zip(ds.examples()) {
                for (x, y) in a.example.features.iter().zip(&b.example.features) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }
}
