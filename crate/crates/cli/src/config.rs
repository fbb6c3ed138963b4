//! Experiment configuration.
//!
//! One TOML file per run. Every section is optional and falls back to the
//! defaults below; `--seed` and `--out` override the file. The fully
//! resolved configuration is echoed into the run directory as
//! `config.toml` and embedded in `manifest.json`, and either file can be fed
//! back through `--config` to repeat the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tritrain::data::{SplitRatios, SyntheticConfig};
use tritrain::learner::TrainParams;
use tritrain::semisup::{ThetaPolicy, WeightPolicy};

use crate::recipes::Settings;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    GenData,
    Train,
    SelfTrain,
    TriTrain,
    Distill,
    Evaluate,
    Ablate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Train => "train",
            Stage::SelfTrain => "self-train",
            Stage::TriTrain => "tri-train",
            Stage::Distill => "distill",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stage: Option<Stage>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(default)]
    pub semisup: SemisupSection,
    #[serde(default)]
    pub distill: DistillSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub gen_data: GenDataSection,
    #[serde(default)]
    pub ablate: AblateSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            stage: None,
            seed: 0,
            out: default_out(),
            data: DataPaths::default(),
            model: ModelSection::default(),
            train: TrainParams::default(),
            semisup: SemisupSection::default(),
            distill: DistillSection::default(),
            evaluate: EvaluateSection::default(),
            gen_data: GenDataSection::default(),
            ablate: AblateSection::default(),
        }
    }
}

/// Dataset files in the labeled / pool CSV formats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub pool: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { hidden: vec![32] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemisupSection {
    pub k: usize,
    pub iterations: usize,
    pub theta: ThetaPolicy,
    pub weights: WeightPolicy,
}

impl Default for SemisupSection {
    fn default() -> Self {
        Self {
            k: 5000,
            iterations: 1,
            theta: ThetaPolicy::default(),
            weights: WeightPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillSection {
    pub alpha: f64,
    pub temperature: f64,
    pub student_temperature: bool,
    /// Ensemble manifest of the teacher.
    pub teacher: Option<PathBuf>,
    /// Precomputed teacher logits; used instead of `teacher` when set.
    pub teacher_logits: Option<PathBuf>,
}

impl Default for DistillSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            temperature: 2.0,
            student_temperature: true,
            teacher: None,
            teacher_logits: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// A checkpoint or an ensemble manifest.
    pub model: Option<PathBuf>,
    /// A score file; replaces `model`.
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataSection {
    /// Full generator description; the built-in benchmark when absent.
    pub synthetic: Option<SyntheticConfig>,
    pub pool_size: Option<usize>,
    pub split: SplitRatios,
    /// Standardize every split and the pool with training-split statistics.
    pub normalize: bool,
}

impl Default for GenDataSection {
    fn default() -> Self {
        Self {
            synthetic: None,
            pool_size: None,
            split: SplitRatios::default(),
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    /// Sup, +Ens, +Ens+Data, +2xEns+Data.
    Factors,
    /// Tri-training ensemble per pool selection size.
    K,
    /// Sup and tri-training per training-to-test size ratio.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateSection {
    pub grid: Grid,
    /// Master seeds; the run seed alone when empty.
    pub seeds: Vec<u64>,
    pub k_values: Vec<usize>,
    pub ratios: Vec<f64>,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            grid: Grid::Factors,
            seeds: Vec::new(),
            k_values: vec![1000, 5000, 10000],
            ratios: vec![0.5, 1.0, 2.0, 3.5],
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Reads a TOML config, or the config embedded in a run manifest when the
    /// file is JSON.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            return Ok(manifest.config);
        }
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn settings(&self) -> Settings {
        Settings {
            hidden: self.model.hidden.clone(),
            k: self.semisup.k,
            iterations: self.semisup.iterations,
            theta: self.semisup.theta.clone(),
            weights: self.semisup.weights,
            train: self.train.clone(),
            alpha: self.distill.alpha,
            temperature: self.distill.temperature,
            student_temperature: self.distill.student_temperature,
            split: self.gen_data.split,
        }
    }

    fn require(&self, field: &str, path: &Option<PathBuf>) -> Result<(), CliError> {
        match path {
            None => Err(invalid(field, "required for this stage")),
            Some(p) if !p.exists() => Err(invalid(field, format!("{} does not exist", p.display()))),
            Some(_) => Ok(()),
        }
    }

    fn optional(&self, field: &str, path: &Option<PathBuf>) -> Result<(), CliError> {
        match path {
            Some(p) if !p.exists() => Err(invalid(field, format!("{} does not exist", p.display()))),
            _ => Ok(()),
        }
    }

    /// Field-level checks that do not need the data.
    pub fn validate(&self, stage: Stage) -> Result<(), CliError> {
        if let Some(s) = self.stage {
            if s != stage {
                return Err(invalid("stage", format!("config is for `{}`, not `{}`", s.name(), stage.name())));
            }
        }
        if self.model.hidden.contains(&0) {
            return Err(invalid("model.hidden", "layer widths must be >= 1"));
        }
        self.train.validate().map_err(|e| invalid("train", e))?;
        if self.semisup.k == 0 {
            return Err(invalid("semisup.k", "must be >= 1"));
        }
        if self.semisup.iterations == 0 {
            return Err(invalid("semisup.iterations", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.distill.alpha) {
            return Err(invalid("distill.alpha", "must lie in [0, 1]"));
        }
        if !(self.distill.temperature > 0.0 && self.distill.temperature.is_finite()) {
            return Err(invalid("distill.temperature", "must be > 0"));
        }
        let d = &self.data;
        match stage {
            Stage::GenData => {
                let r = self.gen_data.split;
                if [r.train, r.dev, r.test].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(invalid("gen_data.split", "ratios must be > 0"));
                }
                if let Some(s) = &self.gen_data.synthetic {
                    s.validate().map_err(|e| invalid("gen_data.synthetic", e))?;
                }
            }
            Stage::Train => {
                self.require("data.train", &d.train)?;
                self.optional("data.dev", &d.dev)?;
                self.optional("data.test", &d.test)?;
            }
            Stage::SelfTrain | Stage::TriTrain => {
                self.require("data.train", &d.train)?;
                self.require("data.pool", &d.pool)?;
                self.optional("data.dev", &d.dev)?;
                self.optional("data.test", &d.test)?;
            }
            Stage::Distill => {
                self.require("data.train", &d.train)?;
                self.optional("data.dev", &d.dev)?;
                self.optional("data.test", &d.test)?;
                if self.distill.teacher_logits.is_some() {
                    self.require("distill.teacher_logits", &self.distill.teacher_logits)?;
                } else {
                    self.require("distill.teacher", &self.distill.teacher)?;
                }
            }
            Stage::Evaluate => {
                self.require("data.test", &d.test)?;
                if self.evaluate.scores.is_some() {
                    self.require("evaluate.scores", &self.evaluate.scores)?;
                } else {
                    self.require("evaluate.model", &self.evaluate.model)?;
                }
            }
            Stage::Ablate => {
                let a = &self.ablate;
                if a.grid == Grid::K && (a.k_values.is_empty() || a.k_values.contains(&0)) {
                    return Err(invalid("ablate.k_values", "need one or more values >= 1"));
                }
                if a.grid == Grid::Ratio && (a.ratios.is_empty() || a.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite()))) {
                    return Err(invalid("ablate.ratios", "need one or more values > 0"));
                }
                let files = [&d.train, &d.dev, &d.test, &d.pool];
                if files.iter().any(|p| p.is_some()) {
                    for (name, p) in ["data.train", "data.dev", "data.test", "data.pool"].iter().zip(files) {
                        self.require(name, p)?;
                    }
                }
            }
        }
        Ok(())
    }
}
