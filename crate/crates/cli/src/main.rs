use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tritrain_cli::{run, CliError, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "tritrain", version, about = "Tri-training, self-training and distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark and its splits.
    GenData(Common),
    /// Supervised training on the labeled split.
    Train(Common),
    /// Self-training with the unlabeled pool.
    SelfTrain(Common),
    /// Ensemble-based tri-training with the unlabeled pool.
    TriTrain(Common),
    /// Distill an ensemble into a single student.
    Distill(Common),
    /// Per-event DET-AUC and EER of a model, ensemble or score file.
    Evaluate(Common),
    /// Run an ablation grid.
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a run manifest to repeat.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn execute(stage: Stage, args: Common) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    run(stage, &cfg, args.quiet).map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::GenData(a) => (Stage::GenData, a),
        Command::Train(a) => (Stage::Train, a),
        Command::SelfTrain(a) => (Stage::SelfTrain, a),
        Command::TriTrain(a) => (Stage::TriTrain, a),
        Command::Distill(a) => (Stage::Distill, a),
        Command::Evaluate(a) => (Stage::Evaluate, a),
        Command::Ablate(a) => (Stage::Ablate, a),
    };
    match execute(stage, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
