//! Camera-gap simulation: a frozen distribution of image transformations and
//! the sample-mean confidence estimator over it.
//!
//! A plan holds the identity plus ten sampled transform chains. Freezing the
//! plan once per search keeps particle costs comparable across evaluations;
//! resampling per evaluation would make global-best bookkeeping incoherent.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::color::RgbPixel;
use crate::error::Result;
use crate::raster::RasterImage;

/// Number of sampled transform chains per plan, besides the identity.
pub const SAMPLED_ITEMS: usize = 10;

/// One transform chain. Corner jitter and brightness are stored as fractions
/// of the image extent / full scale so an item applies to any image size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformItem {
    /// Box-filter downsample factor; upsampled back to the original size.
    pub downsample: u32,
    /// Additive brightness shift in [-0.2, 0.2] of full scale.
    pub brightness: f64,
    /// Per-corner (dx, dy) perspective jitter, fractions of width/height.
    pub corner_jitter: [(f64, f64); 4],
    /// Motion-blur line kernel length in pixels (1 = no blur).
    pub blur_len: u32,
    /// Motion-blur direction in degrees, [0, 180).
    pub blur_angle_deg: f64,
    /// Multiplier applied to the shadow coefficient when the shadowed image
    /// is re-synthesized for this item.
    pub k_multiplier: f64,
}

impl TransformItem {
    pub fn identity() -> Self {
        Self {
            downsample: 1,
            brightness: 0.0,
            corner_jitter: [(0.0, 0.0); 4],
            blur_len: 1,
            blur_angle_deg: 0.0,
            k_multiplier: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self == &Self::identity()
    }
}

/// Sampling ranges for plan items; the defaults bracket modest camera
/// variation and can be overridden through the run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformRanges {
    pub downsample_choices: Vec<u32>,
    pub brightness_max: f64,
    pub corner_jitter_max: f64,
    pub blur_lengths: Vec<u32>,
    pub k_multiplier_range: (f64, f64),
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self {
            downsample_choices: vec![1, 2, 4],
            brightness_max: 0.2,
            corner_jitter_max: 0.08,
            blur_lengths: vec![1, 3, 5, 7],
            k_multiplier_range: (0.85, 1.15),
        }
    }
}

/// The identity item plus [`SAMPLED_ITEMS`] sampled chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPlan {
    items: Vec<TransformItem>,
}

impl TransformPlan {
    /// Hand-build a plan; mainly for tests and degenerate setups.
    pub fn from_items(items: Vec<TransformItem>) -> Self {
        Self { items }
    }

    pub fn items(&self) -> &[TransformItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Derive a plan deterministically from a seed with the default ranges.
pub fn sample_plan(seed: u64) -> TransformPlan {
    sample_plan_with(&TransformRanges::default(), seed)
}

/// Derive a plan deterministically from a seed with explicit ranges.
pub fn sample_plan_with(ranges: &TransformRanges, seed: u64) -> TransformPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(SAMPLED_ITEMS + 1);
    items.push(TransformItem::identity());
    for _ in 0..SAMPLED_ITEMS {
        let jitter = std::array::from_fn(|_| {
            (
                rng.random_range(-ranges.corner_jitter_max..=ranges.corner_jitter_max),
                rng.random_range(-ranges.corner_jitter_max..=ranges.corner_jitter_max),
            )
        });
        items.push(TransformItem {
            downsample: ranges.downsample_choices
                [rng.random_range(0..ranges.downsample_choices.len())],
            brightness: rng.random_range(-ranges.brightness_max..=ranges.brightness_max),
            corner_jitter: jitter,
            blur_len: ranges.blur_lengths[rng.random_range(0..ranges.blur_lengths.len())],
            blur_angle_deg: rng.random_range(0.0..180.0),
            k_multiplier: rng.random_range(ranges.k_multiplier_range.0..=ranges.k_multiplier_range.1),
        });
    }
    TransformPlan { items }
}

/// Apply one chain: perspective warp, then downsample/upsample, then
/// brightness shift, then motion blur. Dimensions and 8-bit range are
/// preserved.
pub fn apply_transform(item: &TransformItem, image: &RasterImage) -> RasterImage {
    let mut out = perspective_warp(image, &item.corner_jitter);
    if item.downsample > 1 {
        out = down_up_sample(&out, item.downsample as usize);
    }
    if item.brightness != 0.0 {
        out = shift_brightness(&out, item.brightness);
    }
    if item.blur_len > 1 {
        out = motion_blur(&out, item.blur_len as usize, item.blur_angle_deg);
    }
    out
}

fn bilinear(image: &RasterImage, fx: f64, fy: f64) -> RgbPixel {
    // fx, fy are pixel-center coordinates
    let u = fx - 0.5;
    let v = fy - 0.5;
    let x0 = u.floor();
    let y0 = v.floor();
    let tx = u - x0;
    let ty = v - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let mut acc = [0.0f64; 3];
    for (dy, wy) in [(0, 1.0 - ty), (1, ty)] {
        for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
            let p = image.pixel_clamped(x0 + dx, y0 + dy);
            let w = wx * wy;
            acc[0] += w * f64::from(p.r);
            acc[1] += w * f64::from(p.g);
            acc[2] += w * f64::from(p.b);
        }
    }
    RgbPixel::new(
        acc[0].round().clamp(0.0, 255.0) as u8,
        acc[1].round().clamp(0.0, 255.0) as u8,
        acc[2].round().clamp(0.0, 255.0) as u8,
    )
}

/// Solve the 3x3 projective map sending each `from` point to its `to` point
/// (h33 fixed to 1), by Gaussian elimination on the 8x8 system.
fn homography(from: [(f64, f64); 4], to: [(f64, f64); 4]) -> [f64; 9] {
    let mut m = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let (x, y) = from[i];
        let (xx, yy) = to[i];
        m[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -xx * x, -xx * y, xx];
        m[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -yy * x, -yy * y, yy];
    }
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for k in col..9 {
            m[col][k] /= p;
        }
        for row in 0..8 {
            if row != col && m[row][col] != 0.0 {
                let f = m[row][col];
                for k in col..9 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    [m[0][8], m[1][8], m[2][8], m[3][8], m[4][8], m[5][8], m[6][8], m[7][8], 1.0]
}

fn perspective_warp(image: &RasterImage, jitter: &[(f64, f64); 4]) -> RasterImage {
    if jitter.iter().all(|&(dx, dy)| dx == 0.0 && dy == 0.0) {
        return image.clone();
    }
    let w = image.width() as f64;
    let h = image.height() as f64;
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    let jittered = std::array::from_fn(|i| {
        (
            corners[i].0 + jitter[i].0 * w,
            corners[i].1 + jitter[i].1 * h,
        )
    });
    // inverse map: output pixel -> source location
    let hm = homography(jittered, corners);
    RasterImage::from_fn(image.width(), image.height(), |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let denom = hm[6] * px + hm[7] * py + hm[8];
        let sx = (hm[0] * px + hm[1] * py + hm[2]) / denom;
        let sy = (hm[3] * px + hm[4] * py + hm[5]) / denom;
        bilinear(image, sx, sy)
    })
}

fn down_up_sample(image: &RasterImage, factor: usize) -> RasterImage {
    let w = image.width();
    let h = image.height();
    let small_w = w.div_ceil(factor);
    let small_h = h.div_ceil(factor);
    let mut small = Vec::with_capacity(small_w * small_h * 3);
    for by in 0..small_h {
        for bx in 0..small_w {
            let mut acc = [0.0f64; 3];
            let mut n = 0.0;
            for y in (by * factor)..((by + 1) * factor).min(h) {
                for x in (bx * factor)..((bx + 1) * factor).min(w) {
                    let p = image.pixel(x, y);
                    acc[0] += f64::from(p.r);
                    acc[1] += f64::from(p.g);
                    acc[2] += f64::from(p.b);
                    n += 1.0;
                }
            }
            for c in acc {
                small.push((c / n).round() as u8);
            }
        }
    }
    let small = RasterImage::from_raw(small_w, small_h, small);
    RasterImage::from_fn(w, h, |x, y| small.pixel(x / factor, y / factor))
}

fn shift_brightness(image: &RasterImage, delta: f64) -> RasterImage {
    let shift = (delta * 255.0).round();
    RasterImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.pixel(x, y);
        let adj = |c: u8| (f64::from(c) + shift).clamp(0.0, 255.0) as u8;
        RgbPixel::new(adj(p.r), adj(p.g), adj(p.b))
    })
}

fn motion_blur(image: &RasterImage, len: usize, angle_deg: f64) -> RasterImage {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let half = (len as f64 - 1.0) / 2.0;
    let offsets: Vec<(isize, isize)> = (0..len)
        .map(|i| {
            let t = i as f64 - half;
            ((t * c).round() as isize, (t * s).round() as isize)
        })
        .collect();
    RasterImage::from_fn(image.width(), image.height(), |x, y| {
        let mut acc = [0.0f64; 3];
        for &(dx, dy) in &offsets {
            let p = image.pixel_clamped(x as isize + dx, y as isize + dy);
            acc[0] += f64::from(p.r);
            acc[1] += f64::from(p.g);
            acc[2] += f64::from(p.b);
        }
        let n = len as f64;
        RgbPixel::new(
            (acc[0] / n).round() as u8,
            (acc[1] / n).round() as u8,
            (acc[2] / n).round() as u8,
        )
    })
}

/// Mean confidence vector over the plan: each item re-synthesizes the
/// shadowed image through `build` with its k-multiplier, transforms it, and
/// queries the classifier once. Issues exactly `plan.len()` queries.
pub fn expected_confidences<B, C>(
    mut build: B,
    plan: &TransformPlan,
    classifier: &C,
) -> Result<Vec<f64>>
where
    B: FnMut(f64) -> RasterImage,
    C: Classifier + ?Sized,
{
    let mut mean = vec![0.0; classifier.classes()];
    for item in &plan.items {
        let staged = build(item.k_multiplier);
        let transformed = apply_transform(item, &staged);
        let conf = classifier.predict(&transformed)?;
        for (m, v) in mean.iter_mut().zip(conf.values()) {
            *m += v;
        }
    }
    let n = plan.items.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Mean confidence of a single class over the plan; same query cost as
/// [`expected_confidences`].
pub fn expected_confidence<B, C>(
    build: B,
    plan: &TransformPlan,
    classifier: &C,
    class_index: usize,
) -> Result<f64>
where
    B: FnMut(f64) -> RasterImage,
    C: Classifier + ?Sized,
{
    Ok(expected_confidences(build, plan, classifier)?[class_index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ConfidenceVector;
    use crate::error::Error;

    struct FixedOracle {
        vectors: Vec<Vec<f64>>,
        counter: crate::classifier::QueryCounter,
    }

    impl FixedOracle {
        fn constant(v: Vec<f64>) -> Self {
            Self { vectors: vec![v], counter: Default::default() }
        }
        fn cycling(vectors: Vec<Vec<f64>>) -> Self {
            Self { vectors, counter: Default::default() }
        }
    }

    impl Classifier for FixedOracle {
        fn classes(&self) -> usize {
            self.vectors[0].len()
        }
        fn predict(&self, _image: &RasterImage) -> Result<ConfidenceVector> {
            let n = self.counter.increment();
            let v = &self.vectors[(n as usize - 1) % self.vectors.len()];
            ConfidenceVector::new(v.clone())
        }
        fn queries(&self) -> u64 {
            self.counter.count()
        }
    }

    fn test_image() -> RasterImage {
        RasterImage::from_fn(16, 16, |x, y| {
            RgbPixel::new((x * 16) as u8, (y * 16) as u8, 128)
        })
    }

    #[test]
    fn same_seed_gives_identical_plans() {
        assert_eq!(sample_plan(9), sample_plan(9));
    }

    #[test]
    fn different_seeds_give_different_plans() {
        assert_ne!(sample_plan(0), sample_plan(1));
    }

    #[test]
    fn plan_has_eleven_items_with_identity_first() {
        let plan = sample_plan(4);
        assert_eq!(plan.len(), SAMPLED_ITEMS + 1);
        assert!(plan.items()[0].is_identity());
        let r = TransformRanges::default();
        for item in &plan.items()[1..] {
            assert!(r.downsample_choices.contains(&item.downsample));
            assert!(item.brightness.abs() <= r.brightness_max);
            for (dx, dy) in item.corner_jitter {
                assert!(dx.abs() <= r.corner_jitter_max && dy.abs() <= r.corner_jitter_max);
            }
            assert!(r.blur_lengths.contains(&item.blur_len));
            assert!((0.0..180.0).contains(&item.blur_angle_deg));
            assert!(item.k_multiplier >= r.k_multiplier_range.0);
            assert!(item.k_multiplier <= r.k_multiplier_range.1);
        }
    }

    #[test]
    fn identity_item_is_a_noop() {
        let img = test_image();
        assert_eq!(apply_transform(&TransformItem::identity(), &img), img);
    }

    #[test]
    fn brightness_on_black_hits_twenty_percent() {
        let black = RasterImage::filled(8, 8, RgbPixel::new(0, 0, 0));
        let item = TransformItem { brightness: 0.2, ..TransformItem::identity() };
        let out = apply_transform(&item, &black);
        let expect = (0.2f64 * 255.0).round() as i32;
        for y in 0..8 {
            for x in 0..8 {
                let p = out.pixel(x, y);
                assert!((i32::from(p.r) - expect).abs() <= 1);
                assert!((i32::from(p.g) - expect).abs() <= 1);
            }
        }
    }

    #[test]
    fn unit_blur_kernel_is_a_noop() {
        let img = test_image();
        for angle in [0.0, 45.0, 137.0] {
            let item = TransformItem { blur_len: 1, blur_angle_deg: angle, ..TransformItem::identity() };
            assert_eq!(apply_transform(&item, &img), img);
        }
    }

    #[test]
    fn transforms_preserve_dimensions() {
        let img = test_image();
        for item in sample_plan(2).items() {
            let out = apply_transform(item, &img);
            assert_eq!(out.width(), img.width());
            assert_eq!(out.height(), img.height());
        }
    }

    #[test]
    fn constant_oracle_mean_is_exact() {
        let oracle = FixedOracle::constant(vec![0.25, 0.75]);
        let plan = sample_plan(1);
        let c = expected_confidence(|_| test_image(), &plan, &oracle, 0).unwrap();
        assert_eq!(c, 0.25);
    }

    #[test]
    fn identity_plan_equals_single_image_confidence() {
        let oracle = FixedOracle::constant(vec![0.5, 0.25, 0.25]);
        let plan = TransformPlan::from_items(vec![TransformItem::identity(); 11]);
        let single = oracle.predict(&test_image()).unwrap().get(1);
        let mean = expected_confidence(|_| test_image(), &plan, &oracle, 1).unwrap();
        assert!((mean - single).abs() < 1e-12);
    }

    #[test]
    fn two_item_plan_averages_to_point_three() {
        let oracle = FixedOracle::cycling(vec![vec![0.2, 0.8], vec![0.4, 0.6]]);
        let plan = TransformPlan::from_items(vec![TransformItem::identity(); 2]);
        let mean = expected_confidence(|_| test_image(), &plan, &oracle, 0).unwrap();
        assert!((mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn one_call_issues_exactly_plan_length_queries() {
        let oracle = FixedOracle::constant(vec![1.0]);
        let plan = sample_plan(6);
        expected_confidences(|_| test_image(), &plan, &oracle).unwrap();
        assert_eq!(oracle.queries(), plan.len() as u64);
    }

    #[test]
    fn mean_is_invariant_under_item_permutation() {
        // image-dependent oracle: confidence of class 0 tracks mean red
        struct MeanRed(crate::classifier::QueryCounter);
        impl Classifier for MeanRed {
            fn classes(&self) -> usize {
                2
            }
            fn predict(&self, image: &RasterImage) -> Result<ConfidenceVector> {
                self.0.increment();
                let mut sum = 0.0;
                for y in 0..image.height() {
                    for x in 0..image.width() {
                        sum += f64::from(image.pixel(x, y).r);
                    }
                }
                let c = sum / (image.width() * image.height()) as f64 / 255.0;
                ConfidenceVector::new(vec![c, 1.0 - c])
            }
            fn queries(&self) -> u64 {
                self.0.count()
            }
        }
        let oracle = MeanRed(Default::default());
        let plan = sample_plan(3);
        let mut reversed = plan.items().to_vec();
        reversed.reverse();
        let rev_plan = TransformPlan::from_items(reversed);
        let a = expected_confidence(|_| test_image(), &plan, &oracle, 0).unwrap();
        let b = expected_confidence(|_| test_image(), &rev_plan, &oracle, 0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn classifier_failure_propagates() {
        struct Failing;
        impl Classifier for Failing {
            fn classes(&self) -> usize {
                2
            }
            fn predict(&self, _: &RasterImage) -> Result<ConfidenceVector> {
                Err(Error::Protocol("down".into()))
            }
            fn queries(&self) -> u64 {
                0
            }
        }
        let plan = sample_plan(0);
        let r = expected_confidences(|_| test_image(), &plan, &Failing);
        assert!(matches!(r, Err(Error::Protocol(_))));
    }

    #[test]
    fn builder_receives_each_items_k_multiplier() {
        let oracle = FixedOracle::constant(vec![1.0]);
        let plan = sample_plan(5);
        let mut seen = Vec::new();
        expected_confidences(
            |k| {
                seen.push(k);
                test_image()
            },
            &plan,
            &oracle,
        )
        .unwrap();
        let expect: Vec<f64> = plan.items().iter().map(|i| i.k_multiplier).collect();
        assert_eq!(seen, expect);
    }
}
