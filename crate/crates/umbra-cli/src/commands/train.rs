//! `umbra train`: fit the built-in model, optionally with random-shadow
//! augmentation, and write weights plus a per-epoch accuracy log.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use umbra::classifier::{train, TrainConfig};

use crate::config::RunConfig;

#[derive(Args)]
pub struct TrainArgs {
    /// Corpus manifest JSON
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generate a synthetic corpus instead: CLASSES,PER_CLASS
    #[arg(long, value_name = "C,N")]
    pub synthetic: Option<String>,
    /// Darken every sample with a fresh random shadow each epoch
    #[arg(long)]
    pub augment_shadows: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "train-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.set_override("corpus", args.corpus.as_ref().map(|p| p.display().to_string()));
    cfg.set_override("synthetic", args.synthetic.clone());
    cfg.set_override("augment_shadows", args.augment_shadows.then_some(true));
    cfg.set_override("epochs", args.epochs);
    cfg.set_override("rate", args.rate);
    cfg.set_override("batch", args.batch);
    let seed = crate::resolve_seed(args.seed, &cfg)?;
    cfg.record("seed", seed);

    let corpus = super::load_or_generate_corpus(
        cfg.get("corpus").map(PathBuf::from).as_deref(),
        cfg.get("synthetic"),
        seed,
    )?;

    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        rate: cfg.parsed_or("rate", defaults.rate)?,
        epochs: cfg.parsed_or("epochs", defaults.epochs)?,
        batch: cfg.parsed_or("batch", defaults.batch)?,
        seed,
    };
    let augment = cfg.parsed_or("augment_shadows", false)?;
    cfg.record("rate", train_cfg.rate);
    cfg.record("epochs", train_cfg.epochs);
    cfg.record("batch", train_cfg.batch);
    cfg.record("augment_shadows", augment);

    let (model, log) = train(&corpus, &train_cfg, augment)?;

    let out = super::ensure_out_dir(&args.out)?;
    model.save(out.join("weights.json"))?;
    let mut log_csv = String::from("epoch,train_accuracy\n");
    for (epoch, acc) in log.iter().enumerate() {
        let _ = writeln!(log_csv, "{},{:.6}", epoch + 1, acc);
    }
    std::fs::write(out.join("training_log.csv"), log_csv)?;
    cfg.write_to(&out)?;

    let final_acc = log.last().copied().unwrap_or(0.0);
    eprintln!("trained {} epochs, final train accuracy {final_acc:.4}", log.len());
    Ok(ExitCode::SUCCESS)
}
