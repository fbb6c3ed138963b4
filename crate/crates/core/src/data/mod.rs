//! Datasets and everything that produces or reshapes them.

mod bootstrap;
mod io;
mod norm;
mod split;
mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bootstrap::{bootstrap_sample, subsample};
pub use io::{load_dataset, save_dataset, save_labels, save_pool, DatasetFile};
pub use norm::{compute_norm_stats, NormStats, STD_FLOOR};
pub use split::{check_balance, split, SplitRatios, Splits};
pub use synthetic::{generate_synthetic, Component, EventSpec, SyntheticConfig, SyntheticData};

/// Binary indicator vector over the event set. Several events may be active.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiHotLabel(Vec<bool>);

impl MultiHotLabel {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self(vec![false; num_classes])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> bool {
        self.0[class]
    }

    pub fn set(&mut self, class: usize, value: bool) {
        self.0[class] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Label as 0/1 reals, the form the loss consumes.
    pub fn to_targets(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn is_negative(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

/// A feature row with a stable identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub features: Vec<f64>,
}

impl Example {
    pub fn new(id: impl Into<String>, features: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            features,
        }
    }
}

/// One row of a labeled dataset. `replica` counts earlier copies of the same
/// original inside a bootstrap sample and is 0 everywhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub example: Example,
    pub label: MultiHotLabel,
    pub replica: u32,
}

impl LabeledExample {
    pub fn new(example: Example, label: MultiHotLabel) -> Self {
        Self {
            example,
            label,
            replica: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    class_names: Vec<String>,
    examples: Vec<LabeledExample>,
}

fn check_features(features: &[f64], dim: usize, id: &str) -> Result<()> {
    if features.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: features.len(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "example `{id}` has non-finite features"
        )));
    }
    Ok(())
}

impl LabeledDataset {
    /// Builds a dataset, validating widths, finiteness and `(id, replica)`
    /// uniqueness.
    pub fn new(dim: usize, class_names: Vec<String>, examples: Vec<LabeledExample>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::InvalidConfig("at least one class is required".into()));
        }
        let mut seen = HashSet::with_capacity(examples.len());
        for row in &examples {
            check_features(&row.example.features, dim, &row.example.id)?;
            if row.label.len() != class_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: class_names.len(),
                    actual: row.label.len(),
                });
            }
            if !seen.insert((row.example.id.as_str(), row.replica)) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate example id `{}`",
                    row.example.id
                )));
            }
        }
        Ok(Self {
            dim,
            class_names,
            examples,
        })
    }

    /// Builds a dataset with the same schema as `self`.
    pub fn with_examples(&self, examples: Vec<LabeledExample>) -> Result<Self> {
        Self::new(self.dim, self.class_names.clone(), examples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.examples
            .iter()
            .map(|e| e.example.features.as_slice())
            .collect()
    }

    pub fn labels(&self) -> Vec<&MultiHotLabel> {
        self.examples.iter().map(|e| &e.label).collect()
    }

    /// Number of positives per class.
    pub fn positive_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for row in &self.examples {
            for (c, &b) in row.label.bits().iter().enumerate() {
                counts[c] += usize::from(b);
            }
        }
        counts
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }
}

/// Unlabeled examples. Ids must be disjoint from any labeled set used
/// alongside the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPool {
    dim: usize,
    examples: Vec<Example>,
}

impl UnlabeledPool {
    pub fn new(dim: usize, examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            check_features(&ex.features, dim, &ex.id)?;
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate example id `{}`",
                    ex.id
                )));
            }
        }
        Ok(Self { dim, examples })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            examples: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Fails if any pool id also names a labeled example.
    pub fn check_disjoint(&self, labeled: &LabeledDataset) -> Result<()> {
        let ids: HashSet<&str> = labeled
            .examples()
            .iter()
            .map(|e| e.example.id.as_str())
            .collect();
        match self.examples.iter().find(|e| ids.contains(e.id.as_str())) {
            Some(e) => Err(Error::InvalidConfig(format!(
                "pool id `{}` also appears in the labeled set",
                e.id
            ))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, x: f64, y: bool) -> LabeledExample {
        LabeledExample {
            example: Example::new(id, vec![x]),
            label: MultiHotLabel::new(vec![y]),
            replica: 0,
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = LabeledDataset::new(1, vec!["a".into()], vec![row("x", 0.0, true), row("x", 1.0, false)]);
        assert!(err.is_err());
    }

    #[test]
    fn replicas_may_share_ids() {
        let mut b = row("x", 0.0, true);
        b.replica = 1;
        assert!(LabeledDataset::new(1, vec!["a".into()], vec![row("x", 0.0, true), b]).is_ok());
    }

    #[test]
    fn rejects_wrong_label_width() {
        let mut r = row("x", 0.0, true);
        r.label = MultiHotLabel::zeros(2);
        assert!(matches!(
            LabeledDataset::new(1, vec!["a".into()], vec![r]),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn pool_disjointness() {
        let ds = LabeledDataset::new(1, vec!["a".into()], vec![row("x", 0.0, true)]).unwrap();
        let pool = UnlabeledPool::new(1, vec![Example::new("x", vec![1.0])]).unwrap();
        assert!(pool.check_disjoint(&ds).is_err());
        let pool = UnlabeledPool::new(1, vec![Example::new("u", vec![1.0])]).unwrap();
        assert!(pool.check_disjoint(&ds).is_ok());
    }
}
