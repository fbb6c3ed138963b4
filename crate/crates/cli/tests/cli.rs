use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tritrain::data::{load_dataset, LabeledDataset};
use tritrain::learner::{load_checkpoint, Predictor};
use tritrain::semisup::load_candidate_log;
use tritrain_cli::RunManifest;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tritrain-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tritrain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tritrain")).args(args).output().expect("binary runs")
}

fn with_config(stage: &str, dir: &Path, name: &str, toml: &str) -> Output {
    let cfg = dir.join(format!("{name}.toml"));
    std::fs::write(&cfg, toml).unwrap();
    tritrain(&[stage, "--quiet", "--config", cfg.to_str().unwrap()])
}

fn labeled(path: &Path) -> LabeledDataset {
    load_dataset(path).unwrap().into_labeled(path).unwrap()
}

/// Small generated benchmark shared by several tests.
fn small_data(dir: &Path) -> String {
    let out = with_config(
        "gen-data",
        dir,
        "gen",
        &format!("seed = 4\nout = {:?}\n[gen_data]\npool_size = 800\n", dir.join("data")),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = |s: &str| dir.join("data").join(s);
    format!(
        "[data]\ntrain = {:?}\ndev = {:?}\ntest = {:?}\npool = {:?}\n[train]\nepochs = 3\n[model]\nhidden = [6]\n",
        p("train.csv"),
        p("dev.csv"),
        p("test.csv"),
        p("pool.csv")
    )
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = scratch("exit1");
    let unknown = with_config("train", &dir, "unknown", "[model]\nwidth = 3\n");
    assert_eq!(unknown.status.code(), Some(1));

    let missing = with_config("train", &dir, "missing", "");
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("data.train"));

    let alpha = with_config("distill", &dir, "alpha", "[distill]\nalpha = 1.5\n");
    assert_eq!(alpha.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&alpha.stderr).contains("distill.alpha"));

    let stage = with_config("train", &dir, "stage", "stage = \"evaluate\"\n");
    assert_eq!(stage.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = scratch("exit2");
    let train = dir.join("broken.csv");
    std::fs::write(&train, "id,x0,y:a\nr1,not-a-number,1\n").unwrap();
    let out = with_config(
        "train",
        &dir,
        "broken",
        &format!("out = {:?}\n[data]\ntrain = {:?}\n", dir.join("run"), train),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_data_is_a_function_of_the_seed() {
    let dir = scratch("gen");
    let run = |seed: &str, out: &str| {
        let o = tritrain(&[
            "gen-data",
            "--quiet",
            "--seed",
            seed,
            "--out",
            dir.join(out).to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        RunManifest::load(&dir.join(out).join("manifest.json")).unwrap()
    };
    let a = run("3", "a");
    let b = run("3", "b");
    let c = run("4", "c");
    let digest = |m: &RunManifest, name: &str| m.output(name).unwrap().sha256.clone();
    for name in ["train.csv", "dev.csv", "test.csv", "pool.csv", "pool_truth.csv"] {
        assert_eq!(digest(&a, name), digest(&b, name), "{name}");
        assert_ne!(digest(&a, name), digest(&c, name), "{name}");
    }
    // Splits are disjoint and the pool stays apart from the labeled rows.
    let train = labeled(&dir.join("a/train.csv"));
    let test = labeled(&dir.join("a/test.csv"));
    let ids: std::collections::HashSet<_> = train.examples().iter().map(|e| e.example.id.clone()).collect();
    assert!(test.examples().iter().all(|e| !ids.contains(&e.example.id)));
}

#[test]
fn tri_train_writes_six_checkpoints_and_an_auditable_log() {
    let dir = scratch("tri");
    let data = small_data(&dir);
    let out = with_config(
        "tri-train",
        &dir,
        "tri",
        &format!("seed = 2\nout = {:?}\n[semisup]\nk = 25\n{data}", dir.join("tri")),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = RunManifest::load(&dir.join("tri/manifest.json")).unwrap();
    let mut checkpoints: Vec<String> = manifest
        .outputs
        .iter()
        .map(|f| f.path.file_name().unwrap().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("model"))
        .collect();
    checkpoints.sort();
    assert_eq!(
        checkpoints,
        ["model1_t0.json", "model1_t1.json", "model2_t0.json", "model2_t1.json", "model3_t0.json", "model3_t1.json"]
    );
    assert!(manifest.output("candidates.csv").is_some());

    // Gate soundness and score definition, recomputed from the saved
    // bootstrap models.
    let log = load_candidate_log(dir.join("tri/candidates.csv")).unwrap();
    assert!(!log.is_empty());
    let pool = load_dataset(dir.join("data/pool.csv")).unwrap().into_pool().unwrap();
    let models: Vec<_> = (1..=3)
        .map(|i| load_checkpoint(dir.join(format!("tri/model{i}_t0.json"))).unwrap().0)
        .collect();
    for cand in &log {
        let x = &pool.examples().iter().find(|e| e.id == cand.example_id).unwrap().features;
        let target = cand.target_model.unwrap();
        let peers: Vec<f64> = (0..3)
            .filter(|&j| j != target)
            .map(|j| models[j].predict_proba(x).unwrap()[cand.class])
            .collect();
        assert!(peers.iter().all(|&p| p > 0.5), "{cand:?}");
        assert!((cand.score - (peers[0] + peers[1]) / 2.0).abs() < 1e-12);
        assert!(cand.assigned_label.get(cand.class));
    }
    for target in 0..3 {
        for c in 0..3 {
            assert!(log.iter().filter(|x| x.target_model == Some(target) && x.class == c).count() <= 25);
        }
    }
}

#[test]
fn evaluate_reports_zero_error_for_oracle_scores() {
    let dir = scratch("oracle");
    let data = small_data(&dir);
    let test = labeled(&dir.join("data/test.csv"));
    let mut csv = String::from("id");
    for name in test.class_names() {
        csv.push_str(&format!(",s:{name}"));
    }
    csv.push('\n');
    for e in test.examples() {
        csv.push_str(&e.example.id);
        for &b in e.label.bits() {
            csv.push_str(if b { ",1" } else { ",0" });
        }
        csv.push('\n');
    }
    let scores = dir.join("oracle.csv");
    std::fs::write(&scores, csv).unwrap();
    let out = with_config(
        "evaluate",
        &dir,
        "eval",
        &format!("out = {:?}\n[evaluate]\nscores = {:?}\n{data}", dir.join("eval"), scores),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("eval/report.txt")).unwrap();
    for name in test.class_names() {
        let line = text.lines().find(|l| l.starts_with(name.as_str())).unwrap();
        assert_eq!(line.matches("0.00").count(), 2, "{line}");
    }
    for name in test.class_names() {
        assert!(dir.join(format!("eval/det_{name}.csv")).exists());
    }
}

#[test]
fn distill_and_evaluate_an_ensemble() {
    let dir = scratch("kd");
    let data = small_data(&dir);
    let tri = with_config(
        "tri-train",
        &dir,
        "tri",
        &format!("out = {:?}\n[semisup]\nk = 10\n{data}", dir.join("tri")),
    );
    assert!(tri.status.success());
    let kd = with_config(
        "distill",
        &dir,
        "kd",
        &format!("out = {:?}\n[distill]\nteacher = {:?}\n{data}", dir.join("kd"), dir.join("tri/ensemble.json")),
    );
    assert!(kd.status.success(), "{}", String::from_utf8_lossy(&kd.stderr));
    assert!(dir.join("kd/student.json").exists());
    assert!(dir.join("kd/teacher_logits.csv").exists());

    // Cached logits give the same student.
    let cached = with_config(
        "distill",
        &dir,
        "kd2",
        &format!(
            "out = {:?}\n[distill]\nteacher_logits = {:?}\n{data}",
            dir.join("kd2"),
            dir.join("kd/teacher_logits.csv")
        ),
    );
    assert!(cached.status.success(), "{}", String::from_utf8_lossy(&cached.stderr));
    let a = RunManifest::load(&dir.join("kd/manifest.json")).unwrap();
    let b = RunManifest::load(&dir.join("kd2/manifest.json")).unwrap();
    assert_eq!(a.output("student.json").unwrap().sha256, b.output("student.json").unwrap().sha256);

    for (name, model) in [("ens", "tri/ensemble.json"), ("student", "kd/student.json")] {
        let out = with_config(
            "evaluate",
            &dir,
            name,
            &format!("out = {:?}\n[evaluate]\nmodel = {:?}\n{data}", dir.join(name), dir.join(model)),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(name).join("report.json")).unwrap()).unwrap();
        assert_eq!(report["events"].as_array().unwrap().len(), 3);
    }
}

fn ablation(dir: &Path, name: &str, section: &str, data: &str) -> serde_json::Value {
    let out = with_config(
        "ablate",
        dir,
        name,
        &format!("out = {:?}\n[semisup]\nk = 10\n[ablate]\n{section}\n{data}", dir.join(name)),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join(name).join("ablation.txt").exists());
    serde_json::from_str(&std::fs::read_to_string(dir.join(name).join("ablation.json")).unwrap()).unwrap()
}

fn labels(table: &serde_json::Value) -> Vec<String> {
    table["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn ablation_grids() {
    let dir = scratch("ablate");
    let data = small_data(&dir);

    let factors = ablation(&dir, "factors", "grid = \"factors\"", &data);
    assert_eq!(labels(&factors), ["Sup", "+Ens", "+Ens+Data", "+2xEns+Data"]);

    let k = ablation(&dir, "k", "grid = \"k\"\nk_values = [5, 10, 20]", &data);
    assert_eq!(labels(&k), ["k=5", "k=10", "k=20"]);
    let text = std::fs::read_to_string(dir.join("k/ablation.txt")).unwrap();
    assert!(text.contains("AUC (%)") && text.contains("EER (%)"));

    // Every ratio is scored on the same test set.
    let ratio = ablation(&dir, "ratio", "grid = \"ratio\"\nratios = [0.5, 1.0]", &data);
    assert_eq!(labels(&ratio), ["Sup@0.5", "Tri@0.5", "Sup@1", "Tri@1"]);
    let counts: Vec<(u64, u64)> = ratio["cells"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["reports"][0]["events"].as_array().unwrap().clone())
        .map(|e| (e["positives"].as_u64().unwrap(), e["negatives"].as_u64().unwrap()))
        .collect();
    let test = labeled(&dir.join("data/test.csv"));
    let expected: Vec<(u64, u64)> = test
        .positive_counts()
        .iter()
        .map(|&p| (p as u64, (test.len() - p) as u64))
        .collect();
    for chunk in counts.chunks(3) {
        assert_eq!(chunk, expected.as_slice());
    }
}

#[test]
fn manifest_reruns_reproduce_outputs() {
    let dir = scratch("rerun");
    let data = small_data(&dir);
    let out = with_config("train", &dir, "sup", &format!("out = {:?}\n{data}", dir.join("sup")));
    assert!(out.status.success());
    let again = dir.join("again");
    let o = tritrain(&[
        "train",
        "--quiet",
        "--config",
        dir.join("sup/manifest.json").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = RunManifest::load(&dir.join("sup/manifest.json")).unwrap();
    let b = RunManifest::load(&again.join("manifest.json")).unwrap();
    for name in ["model.json", "report.json"] {
        assert_eq!(a.output(name).unwrap().sha256, b.output(name).unwrap().sha256, "{name}");
    }
    // The echoed config can be fed back too.
    let o = tritrain(&[
        "train",
        "--quiet",
        "--config",
        dir.join("sup/config.toml").to_str().unwrap(),
        "--out",
        dir.join("third").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let c = RunManifest::load(&dir.join("third/manifest.json")).unwrap();
    assert_eq!(a.output("model.json").unwrap().sha256, c.output("model.json").unwrap().sha256);
}
