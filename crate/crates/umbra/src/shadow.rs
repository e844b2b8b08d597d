//! Shadow synthesis: scale the L channel inside a polygon-masked region by a
//! coefficient k, leaving chromaticity untouched, and estimate k from an
//! observed clean/shadowed pair.

use serde::{Deserialize, Serialize};

use crate::color::{lab_to_rgb, rgb_to_lab};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, Polygon, RegionMask};
use crate::raster::RasterImage;

/// Mean shadow-darkening coefficient measured on the SBU shadow corpus.
pub const DEFAULT_K: f64 = 0.43;

/// The k values swept by the benchmark harness.
pub const K_SWEEP_GRID: [f64; 11] = [
    0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70,
];

/// Everything that determines one synthetic shadow: where it falls
/// (polygon intersected with the target mask) and how dark it is (k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSpec {
    pub polygon: Polygon,
    pub k: f64,
    pub mask: RegionMask,
}

impl ShadowSpec {
    pub fn new(polygon: Polygon, k: f64, mask: RegionMask) -> Result<Self> {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shadow coefficient must be in (0, 1], got {k}"
            )));
        }
        Ok(Self { polygon, k, mask })
    }

    /// The pixel set this spec darkens.
    pub fn region(&self) -> RegionMask {
        rasterize(&self.polygon, &self.mask)
    }
}

/// Cast the shadow: for every pixel in the rasterized region, multiply L by
/// k in Lab space and convert back (clipping at the RGB boundary). All other
/// pixels are byte-identical to the input.
pub fn apply_shadow(image: &RasterImage, spec: &ShadowSpec) -> RasterImage {
    let region = spec.region();
    apply_shadow_in_region(image, &region, spec.k)
}

/// Same as [`apply_shadow`] with the region already rasterized; useful when
/// one region is reused across many k values.
pub fn apply_shadow_in_region(image: &RasterImage, region: &RegionMask, k: f64) -> RasterImage {
    let mut out = image.clone();
    if k == 1.0 {
        return out;
    }
    for (x, y) in region.iter_set() {
        if x >= image.width() || y >= image.height() {
            continue;
        }
        let mut lab = rgb_to_lab(image.pixel(x, y));
        lab.l *= k;
        out.set_pixel(x, y, lab_to_rgb(lab));
    }
    out
}

/// Estimate k as mean(L of shadowed) / mean(L of clean) over `region`,
/// clamped to (0, 1].
pub fn estimate_k(clean: &RasterImage, shadowed: &RasterImage, region: &RegionMask) -> Result<f64> {
    if clean.width() != shadowed.width() || clean.height() != shadowed.height() {
        return Err(Error::DimensionMismatch {
            mask_w: shadowed.width(),
            mask_h: shadowed.height(),
            img_w: clean.width(),
            img_h: clean.height(),
        });
    }
    let mut sum_clean = 0.0;
    let mut sum_shadowed = 0.0;
    let mut n = 0u64;
    for (x, y) in region.iter_set() {
        if x >= clean.width() || y >= clean.height() {
            continue;
        }
        sum_clean += rgb_to_lab(clean.pixel(x, y)).l;
        sum_shadowed += rgb_to_lab(shadowed.pixel(x, y)).l;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    if sum_clean <= 0.0 {
        return Err(Error::ZeroLightness);
    }
    Ok((sum_shadowed / sum_clean).clamp(f64::MIN_POSITIVE, 1.0))
}
