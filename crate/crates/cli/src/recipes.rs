//! Composite pipelines shared by the `ablate` stage and the benchmark.

use serde::{Deserialize, Serialize};
use tritrain::data::{
    compute_norm_stats, generate_synthetic, split, subsample, LabeledDataset, MultiHotLabel, NormStats,
    SplitRatios, SyntheticConfig, UnlabeledPool,
};
use tritrain::ensemble_distill::{distill, DistillParams, Ensemble};
use tritrain::eval::{evaluate, MetricsReport};
use tritrain::learner::{init_model, train, Model, ModelConfig, TrainParams};
use tritrain::semisup::{self_train, tri_train, SelfTrainParams, ThetaPolicy, TriTrainParams, TriTrainResult, WeightPolicy};
use tritrain::{seed, Result};

/// Normalized train / dev / test splits and pool.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: LabeledDataset,
    pub dev: LabeledDataset,
    pub test: LabeledDataset,
    pub pool: UnlabeledPool,
}

/// Generated data after splitting, with the pool's hidden ground truth.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Prepared,
    pub pool_truth: Vec<MultiHotLabel>,
    /// Training-split statistics, when normalized.
    pub norm: Option<NormStats>,
}

/// Generate, split and (optionally) standardize every part with statistics
/// of the training split.
pub fn generate(synth: &SyntheticConfig, ratios: &SplitRatios, split_seed: u64, normalize: bool) -> Result<Generated> {
    let raw = generate_synthetic(synth)?;
    let splits = split(&raw.labeled, *ratios, split_seed, true)?;
    let data = Prepared {
        train: splits.train,
        dev: splits.dev,
        test: splits.test,
        pool: raw.pool,
    };
    if !normalize {
        return Ok(Generated {
            data,
            pool_truth: raw.pool_truth,
            norm: None,
        });
    }
    let stats = compute_norm_stats(&data.train)?;
    Ok(Generated {
        data: Prepared {
            train: stats.apply(&data.train)?,
            dev: stats.apply(&data.dev)?,
            test: stats.apply(&data.test)?,
            pool: stats.apply_pool(&data.pool)?,
        },
        pool_truth: raw.pool_truth,
        norm: Some(stats),
    })
}

/// [`generate`] with normalization, keeping only the splits and pool.
pub fn prepare(synth: &SyntheticConfig, ratios: &SplitRatios, split_seed: u64) -> Result<Prepared> {
    Ok(generate(synth, ratios, split_seed, true)?.data)
}

/// Hyperparameters of one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub hidden: Vec<usize>,
    pub k: usize,
    pub iterations: usize,
    pub theta: ThetaPolicy,
    pub weights: WeightPolicy,
    pub train: TrainParams,
    pub alpha: f64,
    pub temperature: f64,
    pub student_temperature: bool,
    pub split: SplitRatios,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            k: 200,
            iterations: 1,
            theta: ThetaPolicy::default(),
            weights: WeightPolicy::default(),
            // Long enough for every system to pass its best dev epoch.
            train: TrainParams {
                epochs: 150,
                ..TrainParams::default()
            },
            alpha: 0.5,
            temperature: 2.0,
            student_temperature: true,
            split: SplitRatios::default(),
        }
    }
}

/// Seeds derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub split: u64,
    pub model: u64,
    pub train: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            data: seed::derive(master, 10),
            split: seed::derive(master, 11),
            model: seed::derive(master, 12),
            train: seed::derive(master, 13),
        }
    }
}

impl Settings {
    pub fn model(&self, data: &LabeledDataset, seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim: data.dim(),
            hidden: self.hidden.clone(),
            num_classes: data.num_classes(),
            seed,
        }
    }

    pub fn self_params(&self, data: &LabeledDataset, seeds: &Seeds) -> SelfTrainParams {
        SelfTrainParams {
            model: self.model(data, seeds.model),
            k: self.k,
            iterations: self.iterations,
            theta: self.theta.clone(),
            train: self.train.with_seed(seeds.train),
            weights: self.weights,
        }
    }

    pub fn tri_params(&self, data: &LabeledDataset, seeds: &Seeds) -> TriTrainParams {
        let mut p = TriTrainParams::new(self.model(data, seeds.model));
        p.k = self.k;
        p.iterations = self.iterations;
        p.theta = self.theta.clone();
        p.train = self.train.with_seed(seeds.train);
        p.weights = self.weights;
        p.bootstrap_seeds = [1, 2, 3].map(|i| seed::derive(seeds.split, 100 + i));
        p
    }

    pub fn distill_params(&self, data: &LabeledDataset, seeds: &Seeds) -> DistillParams {
        let mut p = DistillParams::new(self.model(data, seeds.model));
        p.alpha = self.alpha;
        p.temperature = self.temperature;
        p.student_temperature = self.student_temperature;
        p.train = self.train.with_seed(seeds.train);
        p
    }
}

/// Test reports of every system in one benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub sup: MetricsReport,
    pub self_train: MetricsReport,
    /// Three bootstrap models, labeled data only.
    pub ens: MetricsReport,
    /// Three tri-trained models.
    pub ens_data: MetricsReport,
    /// All six tri-training models.
    pub tri: MetricsReport,
    pub kd: MetricsReport,
}

impl Outcome {
    pub fn systems(&self) -> [(&'static str, &MetricsReport); 6] {
        [
            ("Sup", &self.sup),
            ("Self", &self.self_train),
            ("+Ens", &self.ens),
            ("+Ens+Data", &self.ens_data),
            ("Tri", &self.tri),
            ("Tri-KD", &self.kd),
        ]
    }
}

/// Supervised baseline on the labeled training split. Matches the initial
/// model of a self-training run with the same settings and seeds.
pub fn supervised(data: &Prepared, settings: &Settings, seeds: &Seeds) -> Result<Model> {
    let model = init_model(&settings.model(&data.train, seeds.model))?;
    let w = settings.weights.weights(&data.train);
    train(&model, &data.train, &w, &settings.train.with_seed(seeds.train), Some(&data.dev))
}

fn ensemble(models: &[Model]) -> Result<Ensemble> {
    Ensemble::new(models.to_vec())
}

/// Tri-training followed by the three derived ensembles.
pub fn tri_ensembles(result: &TriTrainResult) -> Result<(Ensemble, Ensemble, Ensemble)> {
    Ok((
        ensemble(result.initial())?,
        ensemble(result.final_models())?,
        Ensemble::new(result.ensemble_members())?,
    ))
}

/// Every system of the main comparison on one prepared dataset. The
/// self-training run's initial model is the supervised baseline.
pub fn run_all(data: &Prepared, settings: &Settings, seeds: &Seeds) -> Result<Outcome> {
    let dev = Some(&data.dev);
    let st = self_train(&data.train, &data.pool, &settings.self_params(&data.train, seeds), dev)?;
    let tri = tri_train(&data.train, &data.pool, &settings.tri_params(&data.train, seeds), dev)?;
    let (ens, ens_data, six) = tri_ensembles(&tri)?;
    let w = settings.weights.weights(&data.train);
    let student = distill(&six, &data.train, &w, &settings.distill_params(&data.train, seeds), dev)?;
    Ok(Outcome {
        sup: evaluate(&st.initial, &data.test)?,
        self_train: evaluate(&st.model, &data.test)?,
        ens: evaluate(&ens, &data.test)?,
        ens_data: evaluate(&ens_data, &data.test)?,
        tri: evaluate(&six, &data.test)?,
        kd: evaluate(&student, &data.test)?,
    })
}

/// The synthetic benchmark for one master seed.
pub fn benchmark_seed(master: u64, settings: &Settings) -> Result<Outcome> {
    let seeds = Seeds::from_master(master);
    let data = prepare(&SyntheticConfig::benchmark(seeds.data), &settings.split, seeds.split)?;
    run_all(&data, settings, &seeds)
}

/// Reports for Sup, +Ens, +Ens+Data and +2xEns+Data.
pub fn factors(data: &Prepared, settings: &Settings, seeds: &Seeds) -> Result<[MetricsReport; 4]> {
    let sup = supervised(data, settings, seeds)?;
    let tri = tri_train(&data.train, &data.pool, &settings.tri_params(&data.train, seeds), Some(&data.dev))?;
    let (ens, ens_data, six) = tri_ensembles(&tri)?;
    Ok([
        evaluate(&sup, &data.test)?,
        evaluate(&ens, &data.test)?,
        evaluate(&ens_data, &data.test)?,
        evaluate(&six, &data.test)?,
    ])
}

/// Six-model tri-training ensemble report for a given `k`.
pub fn tri_for_k(data: &Prepared, settings: &Settings, seeds: &Seeds, k: usize) -> Result<MetricsReport> {
    let mut s = settings.clone();
    s.k = k;
    let tri = tri_train(&data.train, &data.pool, &s.tri_params(&data.train, seeds), Some(&data.dev))?;
    evaluate(&Ensemble::new(tri.ensemble_members())?, &data.test)
}

/// Training split subsampled to `ratio * |test|` examples; dev and test kept.
pub fn with_train_ratio(data: &Prepared, ratio: f64, seed: u64) -> Result<Prepared> {
    let size = ((ratio * data.test.len() as f64).round() as usize).clamp(1, data.train.len());
    Ok(Prepared {
        train: subsample(&data.train, size, seed)?,
        ..data.clone()
    })
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-event median AUC over runs; `None` where an event was skipped in any run.
pub fn median_auc(reports: &[&MetricsReport]) -> Vec<Option<f64>> {
    let events = reports.first().map_or(0, |r| r.events.len());
    (0..events)
        .map(|e| {
            let v: Option<Vec<f64>> = reports.iter().map(|r| r.auc(e)).collect();
            v.map(|v| median(&v))
        })
        .collect()
}

/// Per-event median EER over runs.
pub fn median_eer(reports: &[&MetricsReport]) -> Vec<Option<f64>> {
    let events = reports.first().map_or(0, |r| r.events.len());
    (0..events)
        .map(|e| {
            let v: Option<Vec<f64>> = reports.iter().map(|r| r.eer(e)).collect();
            v.map(|v| median(&v))
        })
        .collect()
}
