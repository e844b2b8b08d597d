//! `umbra schedule`: simulate the sun sweeping an occluder's shadow across a
//! sign and log the classifier's verdict second by second.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::{NaiveDate, NaiveTime};
use clap::Args;
use umbra::solar::{optimize_occluder, scheduled_sweep, sweep_csv, SceneGeometry, SolarContext};

use crate::config::{format_vertices, parse_vertices, RunConfig};

/// Paper-style default scene: a 0.6 m sign one meter north of a small
/// cardboard occluder placed so the morning shadow crosses the sign face.
const DEFAULT_SIGN_EXTENT: (f64, f64, f64, f64) = (-0.3, 0.3, 1.2, 1.8);
const DEFAULT_OCCLUDER: [[f64; 3]; 4] = [
    [1.62, 1.0, 2.30],
    [1.98, 1.0, 2.30],
    [1.98, 1.0, 2.66],
    [1.62, 1.0, 2.66],
];

#[derive(Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value = "full")]
    pub mask: String,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub oracle_cmd: Option<String>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Latitude in degrees
    #[arg(long)]
    pub lat: Option<f64>,
    /// Longitude in degrees
    #[arg(long)]
    pub lon: Option<f64>,
    /// Sweep date (YYYY-MM-DD)
    #[arg(long)]
    pub date: Option<String>,
    /// Window start (HH:MM:SS)
    #[arg(long)]
    pub start: Option<String>,
    /// Window end (HH:MM:SS)
    #[arg(long)]
    pub end: Option<String>,
    /// Step in seconds
    #[arg(long)]
    pub step_s: Option<u64>,
    /// Search occluder placement so the scheduled instant misclassifies
    #[arg(long)]
    pub optimize: bool,
    /// Scheduled instant for --optimize (HH:MM:SS)
    #[arg(long)]
    pub at: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "schedule-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: ScheduleArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.set_override("image", Some(args.image.display()));
    cfg.set_override("mask", Some(&args.mask));
    cfg.set_override("model", args.model.as_ref().map(|p| p.display().to_string()));
    cfg.set_override("oracle_cmd", args.oracle_cmd.clone());
    cfg.set_override("k", args.k);
    cfg.set_override("lat", args.lat);
    cfg.set_override("lon", args.lon);
    cfg.set_override("date", args.date.clone());
    cfg.set_override("start", args.start.clone());
    cfg.set_override("end", args.end.clone());
    cfg.set_override("step_s", args.step_s);
    cfg.set_override("optimize", args.optimize.then_some(true));
    cfg.set_override("at", args.at.clone());
    let seed = crate::resolve_seed(args.seed, &cfg)?;
    cfg.record("seed", seed);

    let image_path: PathBuf = cfg.get("image").unwrap_or_default().into();
    let mask_spec = cfg.get("mask").unwrap_or("full").to_string();
    let (image, mask) = super::load_image_and_mask(&image_path, &mask_spec)?;
    let model_path = cfg.get("model").map(PathBuf::from);
    let oracle_cmd = cfg.get("oracle_cmd").map(String::from);
    let classifier = super::load_classifier(model_path.as_deref(), oracle_cmd.as_deref())?;

    let k = cfg.parsed_or("k", umbra::DEFAULT_K)?;
    let lat = cfg.parsed_or("lat", 45.0)?;
    let lon = cfg.parsed_or("lon", 0.0)?;
    let date_raw = cfg.get("date").unwrap_or("2026-03-21").to_string();
    let date = NaiveDate::parse_from_str(&date_raw, "%Y-%m-%d")
        .with_context(|| format!("bad date {date_raw:?}"))?;
    let parse_time = |raw: &str| {
        NaiveTime::parse_from_str(raw, "%H:%M:%S").with_context(|| format!("bad time {raw:?}"))
    };
    let start = parse_time(cfg.get("start").unwrap_or("08:25:00"))?;
    let end = parse_time(cfg.get("end").unwrap_or("08:35:00"))?;
    let step_s = cfg.parsed_or("step_s", 1u64)?;
    cfg.record("k", k);
    cfg.record("lat", lat);
    cfg.record("lon", lon);
    cfg.record("date", &date_raw);
    cfg.record("start", start.format("%H:%M:%S"));
    cfg.record("end", end.format("%H:%M:%S"));
    cfg.record("step_s", step_s);

    let sign_extent = match cfg.get("sign_extent") {
        Some(raw) => {
            let v: Vec<f64> = crate::config::parse_list(raw)?;
            anyhow::ensure!(v.len() == 4, "sign_extent needs x_min,x_max,z_min,z_max");
            (v[0], v[1], v[2], v[3])
        }
        None => DEFAULT_SIGN_EXTENT,
    };
    let occluder = match cfg.get("occluder") {
        Some(raw) => parse_vertices(raw)?,
        None => DEFAULT_OCCLUDER.to_vec(),
    };
    let mut scene = SceneGeometry {
        sign_extent,
        occluder,
        image_size: (image.width(), image.height()),
    };

    if cfg.parsed_or("optimize", false)? {
        let at = parse_time(cfg.get("at").unwrap_or("08:30:00"))?;
        let ctx = SolarContext::new(lat, lon, date.and_time(at))?;
        let swarm = umbra::pso::SwarmConfig {
            seed,
            swarm_size: 20,
            max_iters: 40,
            restarts: 2,
            ..Default::default()
        };
        let (found, flipped) = optimize_occluder(&scene, &ctx, &image, &mask, k, &classifier, &swarm)?;
        eprintln!(
            "occluder search {} the prediction at the scheduled time",
            if flipped { "flips" } else { "does not flip" }
        );
        scene.occluder = found;
    }
    cfg.record(
        "sign_extent",
        format!(
            "{},{},{},{}",
            scene.sign_extent.0, scene.sign_extent.1, scene.sign_extent.2, scene.sign_extent.3
        ),
    );
    cfg.record("occluder", format_vertices(&scene.occluder));

    let ctx_start = SolarContext::new(lat, lon, date.and_time(start))?;
    let ctx_end = SolarContext::new(lat, lon, date.and_time(end))?;
    let rows = scheduled_sweep(&scene, &ctx_start, &ctx_end, step_s, &image, &mask, k, &classifier)?;

    let out = super::ensure_out_dir(&args.out)?;
    std::fs::write(out.join("timeline.csv"), sweep_csv(&rows))?;
    cfg.write_to(&out)?;
    Ok(ExitCode::SUCCESS)
}
