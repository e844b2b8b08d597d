//! `umbra oracle`: serve a trained model over the stdio JSON-lines protocol,
//! the reference implementation of the external-oracle interface.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use base64::Engine;
use clap::Args;
use serde::Deserialize;
use umbra::classifier::Classifier;
use umbra::dataio::decode_png;
use umbra::ToyModel;

#[derive(Args)]
pub struct OracleArgs {
    /// Model weights file to serve
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    png_b64: String,
}

pub fn run(args: OracleArgs) -> Result<ExitCode> {
    let model = ToyModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{{\"classes\": {}}}", model.classes())?;
    out.flush()?;

    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Request =
            serde_json::from_str(&line).with_context(|| format!("bad request {line:?}"))?;
        let png = base64::engine::general_purpose::STANDARD
            .decode(&request.png_b64)
            .context("bad base64 payload")?;
        let image = decode_png(&png)?;
        let confidences = model.predict(&image)?;
        let rendered: Vec<String> = confidences.values().iter().map(|c| c.to_string()).collect();
        writeln!(
            out,
            "{{\"id\": {}, \"confidences\": [{}]}}",
            request.id,
            rendered.join(", ")
        )?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}
