pub mod attack;
pub mod bench;
pub mod corpus;
pub mod oracle;
pub mod schedule;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use umbra::classifier::{Classifier, OracleClassifier, ToyModel};
use umbra::dataio;
use umbra::geometry::RegionMask;
use umbra::raster::RasterImage;

/// Either a built-in weights file or an external oracle process.
pub enum AnyClassifier {
    Toy(ToyModel),
    Oracle(OracleClassifier),
}

impl Classifier for AnyClassifier {
    fn classes(&self) -> usize {
        match self {
            AnyClassifier::Toy(m) => m.classes(),
            AnyClassifier::Oracle(o) => o.classes(),
        }
    }
    fn predict(&self, image: &RasterImage) -> umbra::Result<umbra::ConfidenceVector> {
        match self {
            AnyClassifier::Toy(m) => m.predict(image),
            AnyClassifier::Oracle(o) => o.predict(image),
        }
    }
    fn queries(&self) -> u64 {
        match self {
            AnyClassifier::Toy(m) => m.queries(),
            AnyClassifier::Oracle(o) => o.queries(),
        }
    }
}

pub fn load_classifier(model: Option<&Path>, oracle_cmd: Option<&str>) -> Result<AnyClassifier> {
    match (model, oracle_cmd) {
        (Some(path), None) => Ok(AnyClassifier::Toy(
            ToyModel::load(path).with_context(|| format!("loading model {}", path.display()))?,
        )),
        (None, Some(cmd)) => Ok(AnyClassifier::Oracle(
            OracleClassifier::spawn(cmd).with_context(|| format!("spawning oracle {cmd:?}"))?,
        )),
        (Some(_), Some(_)) => bail!("--model and --oracle-cmd are mutually exclusive"),
        (None, None) => bail!("one of --model or --oracle-cmd is required"),
    }
}

pub fn load_image_and_mask(image: &Path, mask: &str) -> Result<(RasterImage, RegionMask)> {
    let img = dataio::load_image(image)
        .with_context(|| format!("loading image {}", image.display()))?;
    let mask = dataio::load_mask(mask, img.width(), img.height())
        .with_context(|| format!("loading mask {mask:?}"))?;
    Ok((img, mask))
}

pub fn ensure_out_dir(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    Ok(out.to_path_buf())
}

/// Load a corpus from a manifest, or synthesize one from "C,N".
pub fn load_or_generate_corpus(
    corpus: Option<&Path>,
    synthetic: Option<&str>,
    seed: u64,
) -> Result<dataio::Corpus> {
    match (corpus, synthetic) {
        (Some(path), None) => {
            dataio::load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
        }
        (None, Some(spec)) => {
            let parts: Vec<usize> = crate::config::parse_list(spec)?;
            if parts.len() != 2 || parts[0] == 0 || parts[1] == 0 {
                bail!("--synthetic expects CLASSES,PER_CLASS, got {spec:?}");
            }
            Ok(dataio::generate_corpus(seed, parts[0], parts[1]))
        }
        (Some(_), Some(_)) => bail!("--corpus and --synthetic are mutually exclusive"),
        (None, None) => bail!("one of --corpus or --synthetic is required"),
    }
}
