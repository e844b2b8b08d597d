//! `umbra corpus`: render the synthetic sign corpus to disk.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use umbra::dataio::{filter_dark, generate_corpus, write_corpus};

use crate::config::RunConfig;

#[derive(Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Drop samples whose in-mask lightness falls below the 0-255 threshold
    #[arg(long)]
    pub filter_dark: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "corpus-out")]
    pub out: PathBuf,
}

pub fn run(args: CorpusArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::default();
    let seed = crate::resolve_seed(args.seed, &cfg)?;
    cfg.record("seed", seed);
    cfg.record("classes", args.classes);
    cfg.record("per_class", args.per_class);
    cfg.record("filter_dark", args.filter_dark);

    let mut corpus = generate_corpus(seed, args.classes, args.per_class);
    if args.filter_dark {
        corpus.samples = filter_dark(corpus.samples);
    }
    let out = super::ensure_out_dir(&args.out)?;
    let manifest = write_corpus(&corpus, &out)?;
    cfg.write_to(&out)?;
    eprintln!(
        "wrote {} samples over {} classes to {}",
        manifest.entries.len(),
        manifest.class_names.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
