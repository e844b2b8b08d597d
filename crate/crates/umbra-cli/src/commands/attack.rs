//! `umbra attack`: one image, one report, before/after PNGs.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use umbra::attack::{attack_digital, attack_robust_with_plan, stabilize, AttackConfig, AttackReport, KChoice};
use umbra::bench::derive_seed;
use umbra::classifier::Classifier;
use umbra::dataio;
use umbra::pso::SwarmConfig;
use umbra::shadow::{apply_shadow, estimate_k};
use umbra::transforms::{sample_plan_with, TransformRanges};

use crate::config::RunConfig;

#[derive(Args)]
pub struct AttackArgs {
    /// Input image (PNG or P6 PPM)
    #[arg(long)]
    pub image: PathBuf,
    /// Target-object mask: a P5 PGM path or "full"
    #[arg(long, default_value = "full")]
    pub mask: String,
    /// Built-in model weights file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// External oracle command (stdio JSON protocol)
    #[arg(long)]
    pub oracle_cmd: Option<String>,
    /// Shadow coefficient
    #[arg(long)]
    pub k: Option<f64>,
    /// Measure k from this shadowed reference image instead of fixing it
    #[arg(long, value_name = "REF")]
    pub measure_k: Option<PathBuf>,
    /// Polygon edge count
    #[arg(long)]
    pub edges: Option<usize>,
    /// Swarm restarts
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Robustify over the transform distribution
    #[arg(long)]
    pub eot: bool,
    /// After success, rerun the search to stabilize the wrong prediction
    #[arg(long)]
    pub stabilize: bool,
    /// Classifier query budget
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "attack-out")]
    pub out: PathBuf,
    /// Flat key=value config file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Swarm size override
    #[arg(long)]
    pub swarm_size: Option<usize>,
    /// Iteration cap override
    #[arg(long)]
    pub iters: Option<usize>,
}

/// The report.json schema: resolved parameters plus the raw attack (and
/// optional stabilization) reports.
#[derive(Serialize)]
pub struct ReportDocument {
    pub k: f64,
    pub eot: bool,
    pub attack: AttackReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilization: Option<AttackReport>,
}

pub fn transform_ranges_from(cfg: &RunConfig) -> Result<TransformRanges> {
    let mut r = TransformRanges::default();
    if let Some(raw) = cfg.get("eot_downsample_choices") {
        r.downsample_choices = crate::config::parse_list(raw)?;
    }
    r.brightness_max = cfg.parsed_or("eot_brightness_max", r.brightness_max)?;
    r.corner_jitter_max = cfg.parsed_or("eot_corner_jitter_max", r.corner_jitter_max)?;
    if let Some(raw) = cfg.get("eot_blur_lengths") {
        r.blur_lengths = crate::config::parse_list(raw)?;
    }
    r.k_multiplier_range.0 = cfg.parsed_or("eot_k_multiplier_lo", r.k_multiplier_range.0)?;
    r.k_multiplier_range.1 = cfg.parsed_or("eot_k_multiplier_hi", r.k_multiplier_range.1)?;
    Ok(r)
}

pub fn swarm_from(cfg: &RunConfig, seed: u64) -> Result<SwarmConfig> {
    let d = SwarmConfig::default();
    Ok(SwarmConfig {
        swarm_size: cfg.parsed_or("swarm_size", d.swarm_size)?,
        inertia_start: cfg.parsed_or("inertia_start", d.inertia_start)?,
        inertia_end: cfg.parsed_or("inertia_end", d.inertia_end)?,
        cognitive: cfg.parsed_or("cognitive", d.cognitive)?,
        social: cfg.parsed_or("social", d.social)?,
        max_iters: cfg.parsed_or("iters", d.max_iters)?,
        velocity_clamp: cfg.parsed_or("velocity_clamp", d.velocity_clamp)?,
        restarts: cfg.parsed_or("restarts", d.restarts)?,
        seed,
    })
}

pub fn run(args: AttackArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.set_override("image", Some(args.image.display()));
    cfg.set_override("mask", Some(&args.mask));
    cfg.set_override("model", args.model.as_ref().map(|p| p.display().to_string()));
    cfg.set_override("oracle_cmd", args.oracle_cmd.clone());
    cfg.set_override("k", args.k);
    cfg.set_override("measure_k", args.measure_k.as_ref().map(|p| p.display().to_string()));
    cfg.set_override("edges", args.edges);
    cfg.set_override("restarts", args.restarts);
    cfg.set_override("eot", args.eot.then_some(true));
    cfg.set_override("stabilize", args.stabilize.then_some(true));
    cfg.set_override("budget", args.budget);
    cfg.set_override("swarm_size", args.swarm_size);
    cfg.set_override("iters", args.iters);
    let seed = crate::resolve_seed(args.seed, &cfg)?;
    cfg.record("seed", seed);

    let image_path: PathBuf = cfg.get("image").unwrap_or_default().into();
    let mask_spec = cfg.get("mask").unwrap_or("full").to_string();
    let (image, mask) = super::load_image_and_mask(&image_path, &mask_spec)?;

    let model_path = cfg.get("model").map(PathBuf::from);
    let oracle_cmd = cfg.get("oracle_cmd").map(String::from);
    let classifier = super::load_classifier(model_path.as_deref(), oracle_cmd.as_deref())?;

    // resolve the shadow coefficient: fixed, measured, or the default
    let k = match (cfg.parsed::<f64>("k")?, cfg.get("measure_k")) {
        (Some(_), Some(_)) => anyhow::bail!("--k and --measure-k are mutually exclusive"),
        (Some(k), None) => k,
        (None, Some(reference)) => {
            let shadowed = dataio::load_image(reference)
                .with_context(|| format!("loading k reference {reference}"))?;
            estimate_k(&image, &shadowed, &mask).context("measuring k")?
        }
        (None, None) => umbra::DEFAULT_K,
    };
    cfg.record("k", k);

    let eot = cfg.parsed_or("eot", false)?;
    let stabilize_requested = cfg.parsed_or("stabilize", false)?;
    let attack_cfg = AttackConfig {
        k: KChoice::Fixed(k),
        edges: cfg.parsed_or("edges", 3)?,
        swarm: swarm_from(&cfg, seed)?,
        use_eot: eot,
        stabilize: stabilize_requested,
        query_budget: cfg.parsed::<u64>("budget")?,
    };
    cfg.record("edges", attack_cfg.edges);
    cfg.record("restarts", attack_cfg.swarm.restarts);
    cfg.record("eot", eot);
    cfg.record("stabilize", stabilize_requested);

    // true label: what the classifier says about the clean image (queries for
    // the label check inside the attack are counted there)
    let y_true = classifier.predict(&image)?.argmax();

    let ranges = transform_ranges_from(&cfg)?;
    let plan_seed = derive_seed(seed, 1);
    let report = if eot {
        let plan = sample_plan_with(&ranges, plan_seed);
        attack_robust_with_plan(&image, y_true, &mask, &classifier, &attack_cfg, &plan)?
    } else {
        attack_digital(&image, y_true, &mask, &classifier, &attack_cfg)?
    };

    let stabilization = if report.success && stabilize_requested {
        match report.adversarial_label {
            Some(wrong) => Some(stabilize(
                &image,
                &mask,
                &classifier,
                wrong,
                &attack_cfg,
                derive_seed(seed, 2),
            )?),
            None => None,
        }
    } else {
        None
    };

    let out = super::ensure_out_dir(&args.out)?;
    let winning_spec = stabilization
        .as_ref()
        .filter(|s| s.success)
        .and_then(|s| s.winning_spec.as_ref())
        .or(report.winning_spec.as_ref());
    let adv = match winning_spec {
        Some(spec) => apply_shadow(&image, spec),
        None => image.clone(),
    };
    dataio::save_png(&image, out.join("before.png"))?;
    dataio::save_png(&adv, out.join("adv.png"))?;

    let success = report.success;
    let document = ReportDocument { k, eot, attack: report, stabilization };
    let file = std::fs::File::create(out.join("report.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &document)?;
    cfg.write_to(&out)?;

    Ok(ExitCode::from(if success { 0 } else { 2 }))
}
