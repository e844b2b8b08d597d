//! Shadow-region geometry: polygons, point membership, and rasterization
//! against a target-object mask.
//!
//! Membership uses the even-odd rule so that self-intersecting vertex orders
//! (which the swarm search produces freely) still define a region, and the
//! boundary counts as inside. Pixels are tested at their centers; there is no
//! anti-aliasing because the perturbation model is a hard binary case split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-9;

/// A polygon given by s >= 3 vertices in (column, row) image coordinates.
/// Vertices may lie outside the image and the outline may self-intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::TooFewVertices(vertices.len()));
        }
        Ok(Self { vertices })
    }

    /// Build from a flat [x0, y0, x1, y1, ...] coordinate vector.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidConfig("odd coordinate count".into()));
        }
        Self::new(coords.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// True when all vertices are collinear; such polygons enclose nothing.
    pub fn is_degenerate(&self) -> bool {
        let (x0, y0) = self.vertices[0];
        let (x1, y1) = self.vertices[1];
        self.vertices.iter().skip(2).all(|&(x, y)| {
            let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
            cross.abs() <= EDGE_EPS
        })
    }

    /// Even-odd membership; points on an edge count as inside. A degenerate
    /// (all-collinear) polygon contains nothing.
    pub fn contains(&self, point: (f64, f64)) -> bool {
        if self.is_degenerate() {
            return false;
        }
        let (px, py) = point;
        if self.on_boundary(px, py) {
            return true;
        }
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = self.vertices[i];
            let (xj, yj) = self.vertices[j];
            if (yi > py) != (yj > py) {
                let x_cross = xi + (py - yi) / (yj - yi) * (xj - xi);
                if px < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    fn on_boundary(&self, px: f64, py: f64) -> bool {
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = self.vertices[i];
            let (xj, yj) = self.vertices[j];
            let cross = (xj - xi) * (py - yi) - (yj - yi) * (px - xi);
            if cross.abs() <= EDGE_EPS
                && px >= xi.min(xj) - EDGE_EPS
                && px <= xi.max(xj) + EDGE_EPS
                && py >= yi.min(yj) - EDGE_EPS
                && py <= yi.max(yj) + EDGE_EPS
            {
                return true;
            }
            j = i;
        }
        false
    }

    /// Signed-area centroid; falls back to the vertex mean for degenerate
    /// outlines. Used for sweep diagnostics.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.vertices.len();
        let mut area2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            let w = x0 * y1 - x1 * y0;
            area2 += w;
            cx += (x0 + x1) * w;
            cy += (y0 + y1) * w;
        }
        if area2.abs() <= EDGE_EPS {
            let inv = 1.0 / n as f64;
            return (
                self.vertices.iter().map(|v| v.0).sum::<f64>() * inv,
                self.vertices.iter().map(|v| v.1).sum::<f64>() * inv,
            );
        }
        (cx / (3.0 * area2), cy / (3.0 * area2))
    }

    /// Absolute area enclosed by the outline (shoelace; self-intersection
    /// cancels, so this is exact only for simple polygons).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            area2 += x0 * y1 - x1 * y0;
        }
        area2.abs() / 2.0
    }
}

/// An H x W boolean grid marking the target object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    /// All-true mask covering the whole frame.
    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    /// All-false mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    /// Iterate set coordinates in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

// Masks ride along inside serialized attack reports; pack the bits compactly.
impl Serialize for RegionMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use base64::Engine;
        let mut packed = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        let mut state = serializer.serialize_struct("RegionMask", 3)?;
        use serde::ser::SerializeStruct;
        state.serialize_field("width", &self.width)?;
        state.serialize_field("height", &self.height)?;
        state.serialize_field(
            "bits_b64",
            &base64::engine::general_purpose::STANDARD.encode(&packed),
        )?;
        state.end()
    }
}

impl<'de> Deserialize<'de> for RegionMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use base64::Engine;
        #[derive(Deserialize)]
        struct Packed {
            width: usize,
            height: usize,
            bits_b64: String,
        }
        let p = Packed::deserialize(deserializer)?;
        let packed = base64::engine::general_purpose::STANDARD
            .decode(&p.bits_b64)
            .map_err(serde::de::Error::custom)?;
        let n = p.width * p.height;
        if packed.len() != n.div_ceil(8) {
            return Err(serde::de::Error::custom("mask bit count mismatch"));
        }
        let bits = (0..n).map(|i| packed[i / 8] & (1 << (i % 8)) != 0).collect();
        Ok(Self { width: p.width, height: p.height, bits })
    }
}

/// Pixel-center rasterization of `poly` intersected with `mask`.
pub fn rasterize(poly: &Polygon, mask: &RegionMask) -> RegionMask {
    if poly.is_degenerate() {
        return RegionMask::empty(mask.width, mask.height);
    }
    // limit the scan to the polygon's bounding box
    let xs = poly.vertices().iter().map(|v| v.0);
    let ys = poly.vertices().iter().map(|v| v.1);
    let min_x = xs.clone().fold(f64::INFINITY, f64::min);
    let max_x = xs.fold(f64::NEG_INFINITY, f64::max);
    let min_y = ys.clone().fold(f64::INFINITY, f64::min);
    let max_y = ys.fold(f64::NEG_INFINITY, f64::max);

    let x0 = (min_x - 1.0).floor().max(0.0) as usize;
    let y0 = (min_y - 1.0).floor().max(0.0) as usize;
    let x1 = ((max_x + 1.0).ceil() as usize).min(mask.width);
    let y1 = ((max_y + 1.0).ceil() as usize).min(mask.height);

    let mut out = RegionMask::empty(mask.width, mask.height);
    for y in y0..y1 {
        for x in x0..x1 {
            if mask.get(x, y) && poly.contains((x as f64 + 0.5, y as f64 + 0.5)) {
                out.set(x, y, true);
            }
        }
    }
    out
}
