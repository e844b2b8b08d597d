//! `umbra bench`: sweep one attack parameter over a corpus and write the
//! success-rate and mean-query tables as CSV, one row per model and one
//! column per swept value.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Args;
use umbra::attack::{AttackConfig, KChoice};
use umbra::bench::attack_corpus;
use umbra::shadow::K_SWEEP_GRID;

use crate::config::RunConfig;

#[derive(Args)]
pub struct BenchArgs {
    /// Corpus manifest JSON
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generate a synthetic corpus instead: CLASSES,PER_CLASS
    #[arg(long, value_name = "C,N")]
    pub synthetic: Option<String>,
    /// Model weights file; repeat for one table row per model
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Swept parameter
    #[arg(long, value_parser = ["k", "edges", "restarts"], default_value = "k")]
    pub sweep: String,
    /// Swept values, comma separated; defaults depend on --sweep
    #[arg(long)]
    pub grid: Option<String>,
    /// Shadow coefficient for edge/restart sweeps
    #[arg(long)]
    pub k: Option<f64>,
    /// Robustify over the transform distribution
    #[arg(long)]
    pub eot: bool,
    /// Classifier query budget per attack
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel attacks
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Swarm size override
    #[arg(long)]
    pub swarm_size: Option<usize>,
    /// Iteration cap override
    #[arg(long)]
    pub iters: Option<usize>,
    /// Restart count for k/edge sweeps
    #[arg(long)]
    pub restarts: Option<usize>,
}

fn format_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}"),
        None => String::new(),
    }
}

pub fn run(args: BenchArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.set_override("sweep", Some(&args.sweep));
    cfg.set_override("grid", args.grid.clone());
    cfg.set_override("k", args.k);
    cfg.set_override("eot", args.eot.then_some(true));
    cfg.set_override("budget", args.budget);
    cfg.set_override("jobs", args.jobs);
    cfg.set_override("swarm_size", args.swarm_size);
    cfg.set_override("iters", args.iters);
    cfg.set_override("restarts", args.restarts);
    cfg.set_override("corpus", args.corpus.as_ref().map(|p| p.display().to_string()));
    cfg.set_override("synthetic", args.synthetic.clone());
    let seed = crate::resolve_seed(args.seed, &cfg)?;
    cfg.record("seed", seed);

    let corpus = super::load_or_generate_corpus(
        cfg.get("corpus").map(PathBuf::from).as_deref(),
        cfg.get("synthetic"),
        seed,
    )?;
    if corpus.samples.is_empty() {
        bail!("corpus is empty");
    }

    let sweep = cfg.get("sweep").unwrap_or("k").to_string();
    let grid: Vec<f64> = match cfg.get("grid") {
        Some(raw) => crate::config::parse_list(raw)?,
        None => match sweep.as_str() {
            "k" => K_SWEEP_GRID.to_vec(),
            "edges" => vec![3.0, 5.0, 7.0, 9.0],
            "restarts" => vec![1.0, 5.0, 10.0],
            other => bail!("unknown sweep {other:?}"),
        },
    };
    cfg.record(
        "grid",
        grid.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );

    let base = AttackConfig {
        k: KChoice::Fixed(cfg.parsed_or("k", umbra::DEFAULT_K)?),
        edges: cfg.parsed_or("edges", 3)?,
        swarm: super::attack::swarm_from(&cfg, seed)?,
        use_eot: cfg.parsed_or("eot", false)?,
        stabilize: false,
        query_budget: cfg.parsed::<u64>("budget")?,
    };

    let jobs = cfg.parsed_or("jobs", 0usize)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;

    let mut success_rows = Vec::new();
    let mut query_rows = Vec::new();
    for model_path in &args.model {
        let model = umbra::ToyModel::load(model_path)?;
        let mut successes = Vec::new();
        let mut queries = Vec::new();
        for (i, value) in grid.iter().enumerate() {
            let mut attack_cfg = base.clone();
            match sweep.as_str() {
                "k" => attack_cfg.k = KChoice::Fixed(*value),
                "edges" => attack_cfg.edges = *value as usize,
                "restarts" => attack_cfg.swarm.restarts = *value as usize,
                _ => unreachable!(),
            }
            let grid_seed = umbra::bench::derive_seed(seed, 1000 + i as u64);
            let summary = pool.install(|| attack_corpus(&corpus, &model, &attack_cfg, grid_seed))?;
            successes.push(summary.success_rate_percent);
            queries.push(summary.mean_queries_at_success);
        }
        let row_name = model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| model_path.display().to_string());
        success_rows.push((row_name.clone(), successes));
        query_rows.push((row_name, queries));
    }

    let header: String = grid.iter().fold(String::from("model"), |mut acc, v| {
        let _ = write!(acc, ",{sweep}={v}");
        acc
    });
    let mut success_csv = header.clone() + "\n";
    for (name, values) in &success_rows {
        success_csv.push_str(name);
        for v in values {
            let _ = write!(success_csv, ",{v:.2}");
        }
        success_csv.push('\n');
    }
    let mut queries_csv = header + "\n";
    for (name, values) in &query_rows {
        queries_csv.push_str(name);
        for v in values {
            let _ = write!(queries_csv, ",{}", format_cell(*v));
        }
        queries_csv.push('\n');
    }

    let out = super::ensure_out_dir(&args.out)?;
    std::fs::write(out.join("success_rate.csv"), success_csv)?;
    std::fs::write(out.join("mean_queries.csv"), queries_csv)?;
    cfg.write_to(&out)?;
    Ok(ExitCode::SUCCESS)
}
