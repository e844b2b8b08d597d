//! A small two-layer softmax network over 32x32 RGB inputs. It stands in for
//! the full-scale sign classifiers: the attack only ever sees confidences,
//! so any query oracle exercises the complete pipeline.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ConfidenceVector, QueryCounter};
use crate::dataio::Corpus;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::raster::RasterImage;
use crate::shadow::{apply_shadow, ShadowSpec};

pub const INPUT_SIZE: usize = 32 * 32 * 3;
pub const HIDDEN_WIDTH: usize = 64;

/// Dense two-layer network: 3072 inputs -> 64 rectified units -> softmax.
#[derive(Debug, Serialize, Deserialize)]
pub struct ToyModel {
    classes: usize,
    w1: Vec<f64>, // HIDDEN_WIDTH x INPUT_SIZE
    b1: Vec<f64>,
    w2: Vec<f64>, // classes x HIDDEN_WIDTH
    b2: Vec<f64>,
    #[serde(skip, default)]
    counter: QueryCounter,
}

// a clone is a fresh query target: the counter starts at zero
impl Clone for ToyModel {
    fn clone(&self) -> Self {
        Self {
            classes: self.classes,
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2.clone(),
            counter: QueryCounter::new(),
        }
    }
}

impl ToyModel {
    /// Zero-initialized model; predicts the uniform distribution.
    pub fn zeroed(classes: usize) -> Self {
        Self {
            classes,
            w1: vec![0.0; HIDDEN_WIDTH * INPUT_SIZE],
            b1: vec![0.0; HIDDEN_WIDTH],
            w2: vec![0.0; classes * HIDDEN_WIDTH],
            b2: vec![0.0; classes],
            counter: QueryCounter::new(),
        }
    }

    fn random_init(classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut model = Self::zeroed(classes);
        let s1 = (2.0 / INPUT_SIZE as f64).sqrt();
        let s2 = (2.0 / HIDDEN_WIDTH as f64).sqrt();
        for w in &mut model.w1 {
            *w = rng.random_range(-s1..s1);
        }
        for w in &mut model.w2 {
            *w = rng.random_range(-s2..s2);
        }
        model
    }

    /// Pixels scaled to [0,1] after nearest-neighbor resize to 32x32.
    fn features(image: &RasterImage) -> Vec<f64> {
        let resized = if image.width() == 32 && image.height() == 32 {
            image.clone()
        } else {
            image.resize_nearest(32, 32)
        };
        resized.as_bytes().iter().map(|&b| f64::from(b) / 255.0).collect()
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut hidden = vec![0.0; HIDDEN_WIDTH];
        for (h, hv) in hidden.iter_mut().enumerate() {
            let row = &self.w1[h * INPUT_SIZE..(h + 1) * INPUT_SIZE];
            let mut acc = self.b1[h];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *hv = acc.max(0.0);
        }
        let mut logits = vec![0.0; self.classes];
        for (c, lv) in logits.iter_mut().enumerate() {
            let row = &self.w2[c * HIDDEN_WIDTH..(c + 1) * HIDDEN_WIDTH];
            let mut acc = self.b2[c];
            for (w, hv) in row.iter().zip(&hidden) {
                acc += w * hv;
            }
            *lv = acc;
        }
        (hidden, logits)
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    /// Fraction of samples whose argmax matches the label. No counter ticks.
    pub fn accuracy(&self, corpus: &Corpus) -> f64 {
        let correct = corpus
            .samples
            .iter()
            .filter(|s| {
                let (_, logits) = self.forward(&Self::features(&s.image));
                softmax_argmax(&logits) == s.label
            })
            .count();
        correct as f64 / corpus.samples.len() as f64
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn softmax_argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

impl Classifier for ToyModel {
    fn classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, image: &RasterImage) -> Result<ConfidenceVector> {
        self.counter.increment();
        let (_, logits) = self.forward(&Self::features(image));
        ConfidenceVector::new(softmax(&logits))
    }

    fn queries(&self) -> u64 {
        self.counter.count()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { rate: 0.01, epochs: 30, batch: 16, seed: 0 }
    }
}

/// Train by mini-batch gradient descent on the cross-entropy loss.
///
/// With `augment_shadows`, every sample in every epoch is darkened by a
/// fresh random triangle shadow (vertices uniform over the frame, k uniform
/// in [0.2, 0.7]) before the gradient step. Deterministic given the seed.
/// Returns the model and per-epoch training accuracy.
pub fn train(corpus: &Corpus, cfg: &TrainConfig, augment_shadows: bool) -> Result<(ToyModel, Vec<f64>)> {
    if corpus.samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let classes = corpus.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ToyModel::random_init(classes, &mut rng);
    let n = corpus.samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        // Fisher-Yates driven by the same stream for reproducibility
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grad_w1 = vec![0.0; model.w1.len()];
            let mut grad_b1 = vec![0.0; model.b1.len()];
            let mut grad_w2 = vec![0.0; model.w2.len()];
            let mut grad_b2 = vec![0.0; model.b2.len()];

            for &idx in chunk {
                let sample = &corpus.samples[idx];
                let image = if augment_shadows {
                    let w = sample.image.width() as f64;
                    let h = sample.image.height() as f64;
                    let verts = (0..3)
                        .map(|_| (rng.random_range(0.0..w), rng.random_range(0.0..h)))
                        .collect::<Vec<_>>();
                    let k = rng.random_range(0.2..=0.7);
                    let spec = ShadowSpec::new(Polygon::new(verts)?, k, sample.mask.clone())?;
                    apply_shadow(&sample.image, &spec)
                } else {
                    sample.image.clone()
                };
                let x = ToyModel::features(&image);
                let (hidden, logits) = model.forward(&x);
                let probs = softmax(&logits);

                // d(loss)/d(logit_c) = p_c - [c == label]
                let mut dlogits = probs;
                dlogits[sample.label] -= 1.0;

                for c in 0..classes {
                    grad_b2[c] += dlogits[c];
                    let row = &mut grad_w2[c * HIDDEN_WIDTH..(c + 1) * HIDDEN_WIDTH];
                    for (g, hv) in row.iter_mut().zip(&hidden) {
                        *g += dlogits[c] * hv;
                    }
                }
                let mut dhidden = vec![0.0; HIDDEN_WIDTH];
                for c in 0..classes {
                    let row = &model.w2[c * HIDDEN_WIDTH..(c + 1) * HIDDEN_WIDTH];
                    for (dh, w) in dhidden.iter_mut().zip(row) {
                        *dh += dlogits[c] * w;
                    }
                }
                for h in 0..HIDDEN_WIDTH {
                    if hidden[h] <= 0.0 {
                        continue;
                    }
                    grad_b1[h] += dhidden[h];
                    let row = &mut grad_w1[h * INPUT_SIZE..(h + 1) * INPUT_SIZE];
                    for (g, xi) in row.iter_mut().zip(&x) {
                        *g += dhidden[h] * xi;
                    }
                }
            }

            let scale = cfg.rate / chunk.len() as f64;
            for (w, g) in model.w1.iter_mut().zip(&grad_w1) {
                *w -= scale * g;
            }
            for (b, g) in model.b1.iter_mut().zip(&grad_b1) {
                *b -= scale * g;
            }
            for (w, g) in model.w2.iter_mut().zip(&grad_w2) {
                *w -= scale * g;
            }
            for (b, g) in model.b2.iter_mut().zip(&grad_b2) {
                *b -= scale * g;
            }
        }
        log.push(model.accuracy(corpus));
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::RgbPixel;
    use crate::dataio::{generate_corpus, Sample};
    use crate::geometry::RegionMask;

    #[test]
    fn zero_model_is_uniform() {
        let model = ToyModel::zeroed(8);
        let img = RasterImage::filled(32, 32, RgbPixel::new(10, 200, 80));
        let v = model.predict(&img).unwrap();
        for &c in v.values() {
            assert!((c - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn confidences_are_normalized_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            ToyModel::random_init(6, &mut r)
        };
        for _ in 0..100 {
            let img = RasterImage::from_fn(32, 32, |_, _| {
                RgbPixel::new(rng.random(), rng.random(), rng.random())
            });
            let v = model.predict(&img).unwrap();
            let sum: f64 = v.values().iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn separable_two_class_corpus_trains_to_perfect_accuracy() {
        // two-class corpus: bright plate on the left vs on the right, with
        // per-sample brightness jitter; separable by a single linear cut
        let mk = |side: usize, jitter: u8| Sample {
            image: RasterImage::from_fn(32, 32, |x, _| {
                let lit = (x < 16) == (side == 0);
                let v = if lit { 190 + jitter } else { 50 + jitter };
                RgbPixel::new(v, v, v)
            }),
            label: side,
            mask: RegionMask::full(32, 32),
        };
        let corpus = Corpus {
            samples: (0..20).map(|i| mk(i % 2, (i / 2) as u8 * 3)).collect(),
            class_names: vec!["left".into(), "right".into()],
        };
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let (model, log) = train(&corpus, &cfg, false).unwrap();
        assert_eq!(model.accuracy(&corpus), 1.0);
        assert_eq!(log.len(), 20);

        // augmented training keeps clean accuracy within 2pp here
        let (aug, _) = train(&corpus, &cfg, true).unwrap();
        assert!(aug.accuracy(&corpus) >= 0.98);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let corpus = generate_corpus(1, 3, 6);
        let cfg = TrainConfig { epochs: 3, ..Default::default() };
        let (a, _) = train(&corpus, &cfg, true).unwrap();
        let (b, _) = train(&corpus, &cfg, true).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.w2, b.w2);
        assert_eq!(a.b1, b.b1);
        assert_eq!(a.b2, b.b2);
    }

    #[test]
    fn augmented_weights_differ_from_plain() {
        let corpus = generate_corpus(2, 3, 6);
        let cfg = TrainConfig { epochs: 2, ..Default::default() };
        let (plain, _) = train(&corpus, &cfg, false).unwrap();
        let (aug, _) = train(&corpus, &cfg, true).unwrap();
        assert_ne!(plain.w1, aug.w1);
    }

    #[test]
    fn model_save_load_round_trip() {
        let corpus = generate_corpus(4, 2, 4);
        let cfg = TrainConfig { epochs: 2, ..Default::default() };
        let (model, _) = train(&corpus, &cfg, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        model.save(&path).unwrap();
        let loaded = ToyModel::load(&path).unwrap();
        assert_eq!(model.w1, loaded.w1);
        assert_eq!(model.b2, loaded.b2);
    }
}
