//! Seeded, event-stratified train/dev/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            dev: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }

    fn validate(&self, require_all: bool) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("split ratios must be finite and >= 0".into()));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split ratios must sum to 1".into()));
        }
        if self.train <= 0.0 {
            return Err(Error::EmptySplit("train"));
        }
        if require_all && self.dev <= 0.0 {
            return Err(Error::EmptySplit("dev"));
        }
        if require_all && self.test <= 0.0 {
            return Err(Error::EmptySplit("test"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: LabeledDataset,
    pub dev: LabeledDataset,
    pub test: LabeledDataset,
}

/// Largest-remainder apportionment of `n` items; ties go to the lower index.
fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut alloc = [0usize; 3];
    for (a, e) in alloc.iter_mut().zip(&exact) {
        *a = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut rest = n - alloc.iter().sum::<usize>();
    for &s in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if ratios[s] > 0.0 {
            alloc[s] += 1;
            rest -= 1;
        }
    }
    alloc
}

/// Partitions `data` into train/dev/test.
///
/// Positives of each event (rarest event first) form their own stratum and
/// are apportioned by the ratios, with every active split receiving at least
/// one positive when the stratum is large enough. All-negative examples fill
/// the remaining capacity so overall split sizes match the ratios up to
/// rounding. With `require_all` every split must be non-empty; otherwise only
/// train is required (e.g. ratios `(1, 0, 0)`).
pub fn split(data: &LabeledDataset, ratios: SplitRatios, seed: u64, require_all: bool) -> Result<Splits> {
    ratios.validate(require_all)?;
    let r = ratios.as_array();
    let n = data.len();
    let active: Vec<usize> = (0..3).filter(|&s| r[s] > 0.0).collect();
    let targets = apportion(n, &r);
    let mut rng = seed::rng(seed);

    let counts = data.positive_counts();
    let mut events: Vec<usize> = (0..data.num_classes()).collect();
    events.sort_by_key(|&c| (counts[c], c));

    let mut taken = vec![false; n];
    let mut strata: Vec<Vec<usize>> = Vec::new();
    for &c in &events {
        let stratum: Vec<usize> = (0..n)
            .filter(|&i| !taken[i] && data.examples()[i].label.get(c))
            .collect();
        stratum.iter().for_each(|&i| taken[i] = true);
        strata.push(stratum);
    }
    strata.push((0..n).filter(|&i| !taken[i]).collect());

    let mut assigned = [0usize; 3];
    let mut parts: [Vec<usize>; 3] = Default::default();
    let last = strata.len() - 1;
    for (si, mut stratum) in strata.into_iter().enumerate() {
        stratum.shuffle(&mut rng);
        let len = stratum.len();
        let alloc = if si < last {
            let mut alloc = apportion(len, &r);
            if len >= active.len() {
                for &s in &active {
                    if alloc[s] == 0 {
                        let donor = (0..3).max_by_key(|&k| (alloc[k], 3 - k)).unwrap();
                        alloc[donor] -= 1;
                        alloc[s] += 1;
                    }
                }
            }
            alloc
        } else {
            fill_remaining(len, &targets, &assigned, &r)
        };
        let mut it = stratum.into_iter();
        for s in 0..3 {
            parts[s].extend(it.by_ref().take(alloc[s]));
            assigned[s] += alloc[s];
        }
    }

    let names = ["train", "dev", "test"];
    let mut out = Vec::with_capacity(3);
    for (s, mut idx) in parts.into_iter().enumerate() {
        if idx.is_empty() && (s == 0 || require_all) {
            return Err(Error::EmptySplit(names[s]));
        }
        idx.sort_unstable();
        let rows = idx.into_iter().map(|i| data.examples()[i].clone()).collect();
        out.push(data.with_examples(rows)?);
    }
    let test = out.pop().unwrap();
    let dev = out.pop().unwrap();
    let train = out.pop().unwrap();
    Ok(Splits { train, dev, test })
}

fn fill_remaining(len: usize, targets: &[usize; 3], assigned: &[usize; 3], r: &[f64; 3]) -> [usize; 3] {
    let mut alloc = [0usize; 3];
    for s in 0..3 {
        alloc[s] = targets[s].saturating_sub(assigned[s]);
    }
    let mut total: usize = alloc.iter().sum();
    while total > len {
        let s = (0..3).max_by_key(|&k| (alloc[k], 3 - k)).unwrap();
        alloc[s] -= 1;
        total -= 1;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    for &s in order.iter().cycle() {
        if total == len {
            break;
        }
        if r[s] > 0.0 {
            alloc[s] += 1;
            total += 1;
        }
    }
    alloc
}

/// Largest relative deviation of any split's per-event positive rate from
/// the rate in `whole`. Events without positives in `whole` are skipped.
pub fn check_balance(whole: &LabeledDataset, splits: &Splits) -> Vec<f64> {
    let rate = |d: &LabeledDataset| -> Vec<f64> {
        let n = d.len().max(1) as f64;
        d.positive_counts().into_iter().map(|c| c as f64 / n).collect()
    };
    let global = rate(whole);
    let per_split = [rate(&splits.train), rate(&splits.dev), rate(&splits.test)];
    (0..whole.num_classes())
        .map(|c| {
            if global[c] == 0.0 {
                return 0.0;
            }
            per_split
                .iter()
                .map(|r| ((r[c] - global[c]) / global[c]).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, LabeledExample, MultiHotLabel};
    use std::collections::HashSet;

    fn dataset(n: usize, positives: &[usize]) -> LabeledDataset {
        // Event c is active on the first positives[c] rows after an offset so
        // that events overlap a little.
        let examples = (0..n)
            .map(|i| {
                let bits = positives
                    .iter()
                    .enumerate()
                    .map(|(c, &p)| {
                        let start = c * 7;
                        i >= start && i < start + p
                    })
                    .collect();
                LabeledExample {
                    example: Example::new(format!("e{i:05}"), vec![i as f64]),
                    label: MultiHotLabel::new(bits),
                    replica: 0,
                }
            })
            .collect();
        let names = (0..positives.len()).map(|c| format!("ev{c}")).collect();
        LabeledDataset::new(1, names, examples).unwrap()
    }

    #[test]
    fn sizes_follow_ratios() {
        let ds = dataset(1000, &[60, 30, 10]);
        let s = split(&ds, SplitRatios::default(), 3, true).unwrap();
        assert!((s.train.len() as i64 - 700).abs() <= 1);
        assert!((s.dev.len() as i64 - 100).abs() <= 1);
        assert!((s.test.len() as i64 - 200).abs() <= 1);
    }

    #[test]
    fn partition_is_exact_and_disjoint() {
        let ds = dataset(537, &[80, 41, 12]);
        let s = split(&ds, SplitRatios::default(), 11, true).unwrap();
        let ids = |d: &LabeledDataset| -> HashSet<String> {
            d.examples().iter().map(|r| r.example.id.clone()).collect()
        };
        let (a, b, c) = (ids(&s.train), ids(&s.dev), ids(&s.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.len() + b.len() + c.len(), ds.len());
    }

    #[test]
    fn rare_event_reaches_dev_and_test() {
        let ds = dataset(1000, &[10]);
        for seed in 0..20 {
            let s = split(&ds, SplitRatios::default(), seed, true).unwrap();
            assert!(s.dev.positive_counts()[0] >= 1);
            assert!(s.test.positive_counts()[0] >= 1);
        }
    }

    #[test]
    fn train_only_mode() {
        let ds = dataset(50, &[5]);
        let all_train = SplitRatios {
            train: 1.0,
            dev: 0.0,
            test: 0.0,
        };
        assert!(matches!(split(&ds, all_train, 0, true), Err(Error::EmptySplit(_))));
        let s = split(&ds, all_train, 0, false).unwrap();
        assert_eq!(s.train.len(), 50);
        assert!(s.dev.is_empty() && s.test.is_empty());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let ds = dataset(50, &[5]);
        let bad = SplitRatios {
            train: 0.5,
            dev: 0.1,
            test: 0.1,
        };
        assert!(matches!(split(&ds, bad, 0, true), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn too_small_for_three_splits() {
        let ds = dataset(2, &[1]);
        assert!(matches!(
            split(&ds, SplitRatios::default(), 0, true),
            Err(Error::EmptySplit(_))
        ));
    }

    #[test]
    fn event_rates_stay_balanced() {
        let ds = dataset(4500, &[300, 300, 300]);
        let s = split(&ds, SplitRatios::default(), 5, true).unwrap();
        for dev in check_balance(&ds, &s) {
            assert!(dev <= 0.2, "relative deviation {dev}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = dataset(300, &[30, 20]);
        let a = split(&ds, SplitRatios::default(), 9, true).unwrap();
        let b = split(&ds, SplitRatios::default(), 9, true).unwrap();
        assert_eq!(a.test, b.test);
        let c = split(&ds, SplitRatios::default(), 10, true).unwrap();
        assert_ne!(a.test, c.test);
    }
}
