//! The in-memory image type all perturbations operate on.

use crate::color::RgbPixel;

/// An H x W interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    /// Solid-color image.
    pub fn filled(width: usize, height: usize, fill: RgbPixel) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&[fill.r, fill.g, fill.b]);
        }
        Self { width, height, data }
    }

    /// Build from a pixel function of (column, row).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> RgbPixel) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                data.extend_from_slice(&[p.r, p.g, p.b]);
            }
        }
        Self { width, height, data }
    }

    /// Wrap raw interleaved RGB bytes; `data.len()` must equal `width * height * 3`.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height * 3, "raw buffer size mismatch");
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> RgbPixel {
        let i = (y * self.width + x) * 3;
        RgbPixel::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, p: RgbPixel) {
        let i = (y * self.width + x) * 3;
        self.data[i] = p.r;
        self.data[i + 1] = p.g;
        self.data[i + 2] = p.b;
    }

    /// Clamped lookup; coordinates outside the frame replicate the edge.
    pub fn pixel_clamped(&self, x: isize, y: isize) -> RgbPixel {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixel(x, y)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Nearest-neighbor resize.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> RasterImage {
        RasterImage::from_fn(new_w, new_h, |x, y| {
            let sx = x * self.width / new_w;
            let sy = y * self.height / new_h;
            self.pixel(sx, sy)
        })
    }
}
