use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;

use super::{LabeledDataset, LabeledExample};
use crate::{seed, Error, Result};

/// Draws `data.len()` rows uniformly with replacement.
///
/// Rows keep their original id; the `replica` field numbers repeated draws
/// of the same original in draw order (0 for the first copy).
pub fn bootstrap_sample(data: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = data.len();
    let mut rng = seed::rng(seed);
    let mut copies: HashMap<usize, u32> = HashMap::new();
    let rows = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            let replica = copies.entry(i).or_insert(0);
            let row = LabeledExample {
                replica: *replica,
                ..data.examples()[i].clone()
            };
            *replica += 1;
            row
        })
        .collect();
    data.with_examples(rows)
}

/// Uniform subsample of `size` rows without replacement, in original order.
pub fn subsample(data: &LabeledDataset, size: usize, seed: u64) -> Result<LabeledDataset> {
    if size > data.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot subsample {size} rows from {}",
            data.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, data.len(), size).into_vec();
    picked.sort_unstable();
    data.with_examples(picked.into_iter().map(|i| data.examples()[i].clone()).collect())
}
