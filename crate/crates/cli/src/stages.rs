//! One function per pipeline stage. Each reads its inputs, writes its
//! artifacts into the output directory and returns the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use tritrain::data::{
    load_dataset, save_dataset, save_labels, save_pool, LabeledDataset, SyntheticConfig, UnlabeledPool,
};
use tritrain::ensemble_distill::{
    distill_from_logits, load_ensemble, load_teacher_logits, save_ensemble_manifest, save_teacher_logits, Ensemble,
};
use tritrain::eval::{evaluate, evaluate_scores, MetricsReport};
use tritrain::learner::{load_checkpoint, save_checkpoint, Model, Predictor};
use tritrain::semisup::{save_candidate_log, self_train, tri_train};

use crate::ablate;
use crate::config::{ExperimentConfig, Stage};
use crate::manifest::{FileDigest, RunManifest};
use crate::recipes::{self, Prepared, Seeds};
use crate::scores::load_scores;
use crate::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

pub(crate) struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seeds: Seeds,
    out: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    quiet: bool,
}

impl Run<'_> {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn read(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Path of an artifact in the output directory, recorded as written.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        if !self.outputs.contains(&p) {
            self.outputs.push(p.clone());
        }
        p
    }

    fn labeled(&mut self, path: &Path) -> Result<LabeledDataset, CliError> {
        self.read(path);
        Ok(load_dataset(path)?.into_labeled(path)?)
    }

    fn opt_labeled(&mut self, path: &Option<PathBuf>) -> Result<Option<LabeledDataset>, CliError> {
        path.as_deref().map(|p| self.labeled(p)).transpose()
    }

    fn pool(&mut self, path: &Path) -> Result<UnlabeledPool, CliError> {
        self.read(path);
        Ok(load_dataset(path)?.into_pool()?)
    }

    fn checkpoint(&mut self, model: &Model, name: &str) -> Result<PathBuf, CliError> {
        let p = self.output(name);
        save_checkpoint(model, None, &p)?;
        Ok(PathBuf::from(name))
    }

    /// Report files for `report` plus its DET points.
    pub fn report(&mut self, report: &MetricsReport) -> Result<(), CliError> {
        report.save_json(self.output(REPORT_JSON))?;
        let table = report.to_table();
        let p = self.output(REPORT_TEXT);
        std::fs::write(&p, &table).map_err(|e| CliError::io(&p, e))?;
        for p in report.save_det_points(&self.out)? {
            if !self.outputs.contains(&p) {
                self.outputs.push(p);
            }
        }
        self.say(table.trim_end());
        Ok(())
    }

    fn report_on(&mut self, predictor: &dyn Predictor, test: Option<&LabeledDataset>) -> Result<(), CliError> {
        match test {
            Some(t) => self.report(&evaluate(predictor, t)?),
            None => Ok(()),
        }
    }
}

/// Runs `stage` with the effective configuration `cfg`.
pub fn run(stage: Stage, cfg: &ExperimentConfig, quiet: bool) -> Result<RunManifest, CliError> {
    cfg.validate(stage)?;
    let start = Instant::now();
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut effective = cfg.clone();
    effective.stage = Some(stage);

    let mut run = Run {
        cfg: &effective,
        seeds: Seeds::from_master(cfg.seed),
        out: out.clone(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        quiet,
    };
    let config_path = run.output(CONFIG_FILE);
    std::fs::write(&config_path, effective.to_toml()).map_err(|e| CliError::io(&config_path, e))?;

    match stage {
        Stage::GenData => gen_data(&mut run)?,
        Stage::Train => train(&mut run)?,
        Stage::SelfTrain => self_training(&mut run)?,
        Stage::TriTrain => tri_training(&mut run)?,
        Stage::Distill => distillation(&mut run)?,
        Stage::Evaluate => evaluation(&mut run)?,
        Stage::Ablate => ablate::run(&mut run)?,
    }

    let inputs = run.inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>, _>>()?;
    let outputs = run.outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        tool: "tritrain".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage: stage.name().into(),
        seed: effective.seed,
        config: effective.clone(),
        inputs,
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = out.join(MANIFEST_FILE);
    manifest.save(&path)?;
    run.say(format!("wrote {}", path.display()));
    Ok(manifest)
}

/// The generator description a `gen-data` run (or a synthetic ablation)
/// uses for master seed `master`. The generator's own seed is always the
/// data seed derived from the master seed.
pub(crate) fn synthetic_config(cfg: &ExperimentConfig, master: u64) -> SyntheticConfig {
    let data_seed = Seeds::from_master(master).data;
    let mut synth = cfg
        .gen_data
        .synthetic
        .clone()
        .unwrap_or_else(|| SyntheticConfig::benchmark(data_seed));
    synth.seed = data_seed;
    if let Some(n) = cfg.gen_data.pool_size {
        synth.pool_size = n;
    }
    synth
}

fn gen_data(run: &mut Run) -> Result<(), CliError> {
    let synth = synthetic_config(run.cfg, run.cfg.seed);
    let g = recipes::generate(&synth, &run.cfg.gen_data.split, run.seeds.split, run.cfg.gen_data.normalize)?;
    save_dataset(&g.data.train, run.output("train.csv"))?;
    save_dataset(&g.data.dev, run.output("dev.csv"))?;
    save_dataset(&g.data.test, run.output("test.csv"))?;
    save_pool(&g.data.pool, run.output("pool.csv"))?;
    save_labels(&g.data.pool, &g.pool_truth, g.data.train.class_names(), run.output("pool_truth.csv"))?;
    write_json(run, "synthetic.json", &synth)?;
    if let Some(stats) = &g.norm {
        write_json(run, "norm.json", stats)?;
    }
    run.say(format!(
        "train {} / dev {} / test {} labeled, pool {}",
        g.data.train.len(),
        g.data.dev.len(),
        g.data.test.len(),
        g.data.pool.len()
    ));
    Ok(())
}

fn write_json<T: serde::Serialize>(run: &mut Run, name: &str, value: &T) -> Result<(), CliError> {
    let p = run.output(name);
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))
}

/// Train / dev / test / pool as configured; dev is required by the
/// composite recipes, so an absent dev set is an empty stand-in.
type Splits = (LabeledDataset, Option<LabeledDataset>, Option<LabeledDataset>, Option<UnlabeledPool>);

fn load_splits(run: &mut Run, with_pool: bool) -> Result<Splits, CliError> {
    let d = run.cfg.data.clone();
    let train = run.labeled(d.train.as_deref().expect("validated"))?;
    let dev = run.opt_labeled(&d.dev)?;
    let test = run.opt_labeled(&d.test)?;
    let pool = if with_pool {
        Some(run.pool(d.pool.as_deref().expect("validated"))?)
    } else {
        None
    };
    Ok((train, dev, test, pool))
}

fn train(run: &mut Run) -> Result<(), CliError> {
    let (train, dev, test, _) = load_splits(run, false)?;
    let settings = run.cfg.settings();
    let model = tritrain::learner::init_model(&settings.model(&train, run.seeds.model))?;
    let w = settings.weights.weights(&train);
    let model = tritrain::learner::train(&model, &train, &w, &settings.train.with_seed(run.seeds.train), dev.as_ref())?;
    run.checkpoint(&model, "model.json")?;
    run.report_on(&model, test.as_ref())
}

fn self_training(run: &mut Run) -> Result<(), CliError> {
    let (train, dev, test, pool) = load_splits(run, true)?;
    let pool = pool.expect("loaded");
    let params = run.cfg.settings().self_params(&train, &run.seeds);
    let result = self_train(&train, &pool, &params, dev.as_ref())?;
    run.checkpoint(&result.initial, "initial.json")?;
    run.checkpoint(&result.model, "model.json")?;
    fresh_candidate_log(run, &result.candidates)?;
    run.say(format!("{} pseudo-labels selected", result.candidates.len()));
    run.report_on(&result.model, test.as_ref())
}

fn fresh_candidate_log(run: &mut Run, candidates: &[tritrain::semisup::PseudoLabelCandidate]) -> Result<(), CliError> {
    let p = run.output("candidates.csv");
    if p.exists() {
        std::fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
    }
    save_candidate_log(candidates, &p)?;
    Ok(())
}

fn tri_training(run: &mut Run) -> Result<(), CliError> {
    let (train, dev, test, pool) = load_splits(run, true)?;
    let pool = pool.expect("loaded");
    let params = run.cfg.settings().tri_params(&train, &run.seeds);
    let result = tri_train(&train, &pool, &params, dev.as_ref())?;
    let t_last = result.models.len() - 1;
    let mut initial = Vec::new();
    let mut last = Vec::new();
    for i in 0..3 {
        initial.push(run.checkpoint(&result.initial()[i], &format!("model{}_t0.json", i + 1))?);
        last.push(run.checkpoint(&result.final_models()[i], &format!("model{}_t{t_last}.json", i + 1))?);
    }
    let six: Vec<PathBuf> = last.iter().chain(&initial).cloned().collect();
    save_ensemble_manifest(&six, run.output("ensemble.json"))?;
    save_ensemble_manifest(&initial, run.output("ensemble_initial.json"))?;
    save_ensemble_manifest(&last, run.output("ensemble_final.json"))?;
    fresh_candidate_log(run, &result.candidates)?;
    run.say(format!("{} pseudo-labels selected", result.candidates.len()));
    let ensemble = Ensemble::new(result.ensemble_members())?;
    run.report_on(&ensemble, test.as_ref())
}

fn distillation(run: &mut Run) -> Result<(), CliError> {
    let (train, dev, test, _) = load_splits(run, false)?;
    let settings = run.cfg.settings();
    let ds = run.cfg.distill.clone();
    let logits = match (&ds.teacher_logits, &ds.teacher) {
        (Some(path), _) => {
            run.read(path);
            load_teacher_logits(&train, path)?
        }
        (None, Some(path)) => {
            let teacher = load_teacher(run, path)?;
            let logits = teacher.logits_many(&train.features())?;
            save_teacher_logits(&train, &logits, run.output("teacher_logits.csv"))?;
            logits
        }
        (None, None) => unreachable!("validated"),
    };
    let w = settings.weights.weights(&train);
    let params = settings.distill_params(&train, &run.seeds);
    let student = distill_from_logits(&logits, &train, &w, &params, dev.as_ref())?;
    run.checkpoint(&student, "student.json")?;
    run.report_on(&student, test.as_ref())
}

/// Reads an ensemble manifest and records it and every member as inputs.
fn load_teacher(run: &mut Run, path: &Path) -> Result<Ensemble, CliError> {
    run.read(path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let manifest: tritrain::ensemble_distill::EnsembleManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    for m in &manifest.members {
        run.read(&base.join(m));
    }
    Ok(load_ensemble(path)?)
}

fn is_ensemble_manifest(path: &Path) -> bool {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v.get("members").is_some())
}

fn evaluation(run: &mut Run) -> Result<(), CliError> {
    let test_path = run.cfg.data.test.clone().expect("validated");
    let test = run.labeled(&test_path)?;
    let ev = run.cfg.evaluate.clone();
    let report = if let Some(path) = &ev.scores {
        run.read(path);
        evaluate_scores(&load_scores(&test, path)?, &test)?
    } else {
        let path = ev.model.as_deref().expect("validated");
        if is_ensemble_manifest(path) {
            evaluate(&load_teacher(run, path)?, &test)?
        } else {
            run.read(path);
            evaluate(&load_checkpoint(path)?.0, &test)?
        }
    };
    run.report(&report)
}

/// Splits for composite recipes: the configured files when given,
/// otherwise freshly generated synthetic data for `master`.
pub(crate) fn recipe_data(run: &mut Run, master: u64) -> Result<Prepared, CliError> {
    if run.cfg.data.train.is_some() {
        let (train, dev, test, pool) = load_splits(run, true)?;
        return Ok(Prepared {
            train,
            dev: dev.expect("validated"),
            test: test.expect("validated"),
            pool: pool.expect("loaded"),
        });
    }
    let synth = synthetic_config(run.cfg, master);
    let g = &run.cfg.gen_data;
    Ok(recipes::generate(&synth, &g.split, Seeds::from_master(master).split, g.normalize)?.data)
}
