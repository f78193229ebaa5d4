//! Box and mask geometry: areas, intersections, IoU, polygon rasterization,
//! and run-length-encoded binary masks.
//!
//! Conventions, fixed so every downstream number is reproducible:
//! - Boxes are corner-form `(x1, y1, x2, y2)` in continuous pixel
//!   coordinates; the COCO `[x, y, w, h]` form exists only at the I/O
//!   boundary.
//! - Box IoU is continuous — no legacy `+1` pixel convention.
//! - Polygons rasterize under the even-odd rule sampled at pixel centers
//!   `(col + 0.5, row + 0.5)`.
//! - Masks are run-length encoded in column-major pixel order starting with
//!   a background run, the COCO uncompressed-RLE layout.
//!
//! All operations are pure functions on immutable values and safe to call
//! concurrently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in continuous pixel coordinates, corner form.
///
/// Invariant: `x2 >= x1` and `y2 >= y1`, all coordinates finite. Zero-area
/// boxes are permitted; negative extents are rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinates ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::InvalidBox(format!(
                "negative extent ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Internal constructor for coordinates already known to satisfy the
    /// invariant (e.g. produced by clipping or delta decoding).
    pub(crate) fn new_unchecked(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        debug_assert!(x2 >= x1 && y2 >= y1);
        Self { x1, y1, x2, y2 }
    }

    /// Builds a box from the COCO `[x, y, w, h]` external form.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if w < 0.0 || h < 0.0 {
            return Err(Error::InvalidBox(format!("negative size ({w} x {h})")));
        }
        Self::new(x, y, x + w, y + h)
    }

    /// The COCO `[x, y, w, h]` external form. Round-trips losslessly with
    /// [`BBox::from_xywh`].
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2 - self.x1, self.y2 - self.y1]
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of the overlap with `other`; zero when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        iw * ih
    }

    /// Intersection over union in `[0, 1]`; zero when the union has zero
    /// area (both boxes degenerate).
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new_unchecked(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Clamps every coordinate to the canvas `[0, width] x [0, height]`.
    /// A box fully outside degenerates onto the boundary.
    pub fn clip(&self, height: f64, width: f64) -> Self {
        Self::new_unchecked(
            self.x1.clamp(0.0, width),
            self.y1.clamp(0.0, height),
            self.x2.clamp(0.0, width),
            self.y2.clamp(0.0, height),
        )
    }
}

/// Simple polygon in continuous pixel coordinates, implicitly closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        Ok(Self { vertices })
    }

    /// Builds a polygon from the COCO flat form `[x0, y0, x1, y1, ...]`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::InvalidPolygon(format!(
                "flat coordinate list has odd length {}",
                coords.len()
            )));
        }
        Self::new(coords.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    /// Continuous bounding box of the vertices.
    pub fn bounds(&self) -> BBox {
        let mut x1 = f64::INFINITY;
        let mut y1 = f64::INFINITY;
        let mut x2 = f64::NEG_INFINITY;
        let mut y2 = f64::NEG_INFINITY;
        for &(x, y) in &self.vertices {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
        }
        BBox::new_unchecked(x1, y1, x2, y2)
    }

    /// True when every vertex lies on one line, i.e. the polygon has zero
    /// area under any fill rule.
    pub fn is_degenerate(&self) -> bool {
        let (x0, y0) = self.vertices[0];
        let Some(&(x1, y1)) = self
            .vertices
            .iter()
            .find(|&&(x, y)| x != x0 || y != y0)
        else {
            return true; // all vertices coincide
        };
        self.vertices
            .iter()
            .all(|&(x, y)| (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) == 0.0)
    }

    /// Rasterizes onto an `height x width` canvas: pixel `(row, col)` is
    /// foreground iff its center `(col + 0.5, row + 0.5)` lies inside the
    /// polygon under the even-odd rule. Geometry outside the canvas simply
    /// falls off the mask.
    pub fn to_mask(&self, height: u32, width: u32) -> Result<RleMask> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!(
                "mask dimensions must be positive, got {height} x {width}"
            )));
        }
        if self.is_degenerate() {
            return Err(Error::DegeneratePolygon);
        }

        let h = height as usize;
        let w = width as usize;
        let mut bits = vec![false; h * w];
        let n = self.vertices.len();
        let mut crossings: Vec<f64> = Vec::with_capacity(n);

        for row in 0..h {
            let yc = row as f64 + 0.5;
            crossings.clear();
            for i in 0..n {
                let (xa, ya) = self.vertices[i];
                let (xb, yb) = self.vertices[(i + 1) % n];
                // Half-open crossing rule, identical to the classic even-odd
                // point-in-polygon test with the toggle condition `px < xint`.
                if (ya > yc) != (yb > yc) {
                    crossings.push(xa + (yc - ya) * (xb - xa) / (yb - ya));
                }
            }
            if crossings.is_empty() {
                continue;
            }
            crossings.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
            // Pixel center (col + 0.5) is inside iff the number of crossings
            // strictly to its right is odd.
            let total = crossings.len();
            let mut at_or_left = 0usize;
            for col in 0..w {
                let xc = col as f64 + 0.5;
                while at_or_left < total && crossings[at_or_left] <= xc {
                    at_or_left += 1;
                }
                if (total - at_or_left) % 2 == 1 {
                    bits[col * h + row] = true;
                }
            }
        }

        RleMask::encode(&bits, height, width)
    }
}

/// Run-length-encoded binary mask.
///
/// Runs alternate background/foreground in column-major pixel order (flat
/// index `col * height + row`), starting with a background run. Canonical
/// form: only the leading run may be zero-length, and the runs sum to
/// `height * width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    height: u32,
    width: u32,
    runs: Vec<u32>,
}

impl RleMask {
    /// Encodes a column-major bitmap (`bits[col * height + row]`).
    pub fn encode(bits: &[bool], height: u32, width: u32) -> Result<Self> {
        let n = height as usize * width as usize;
        if bits.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "bitmap has {} pixels, expected {height} x {width} = {n}",
                bits.len()
            )));
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut len: u32 = 0;
        for &b in bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        if runs.is_empty() {
            runs.push(0);
        }
        Ok(Self { height, width, runs })
    }

    /// Builds a mask from raw run lengths, normalizing interior zero-length
    /// runs (tolerated on ingest, never produced).
    pub fn from_runs(height: u32, width: u32, runs: &[u32]) -> Result<Self> {
        let total: u64 = runs.iter().map(|&r| r as u64).sum();
        let expected = height as u64 * width as u64;
        if total != expected {
            return Err(Error::InvalidMask(format!(
                "runs sum to {total}, expected {height} x {width} = {expected}"
            )));
        }
        let mut canonical: Vec<u32> = Vec::with_capacity(runs.len());
        // Parity of the position in `canonical` tracks the run value:
        // even = background, odd = foreground.
        for (i, &r) in runs.iter().enumerate() {
            let value_fg = i % 2 == 1;
            if canonical.is_empty() {
                if value_fg {
                    canonical.push(0);
                    canonical.push(r);
                } else {
                    canonical.push(r);
                }
                continue;
            }
            let last_fg = (canonical.len() - 1) % 2 == 1;
            if value_fg == last_fg {
                *canonical.last_mut().expect("non-empty") += r;
            } else if r == 0 {
                // interior zero-length run: nothing to emit
            } else {
                canonical.push(r);
            }
        }
        // Drop a trailing zero left behind by normalization.
        while canonical.len() > 1 && *canonical.last().expect("non-empty") == 0 {
            canonical.pop();
        }
        if canonical.is_empty() {
            canonical.push(0);
        }
        Ok(Self {
            height,
            width,
            runs: canonical,
        })
    }

    /// All-background mask.
    pub fn empty(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            runs: vec![height * width],
        }
    }

    /// All-foreground mask.
    pub fn full(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            runs: vec![0, height * width],
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Decodes to a column-major bitmap (`bits[col * height + row]`).
    pub fn decode(&self) -> Vec<bool> {
        let n = self.height as usize * self.width as usize;
        let mut bits = vec![false; n];
        let mut idx = 0usize;
        let mut value = false;
        for &r in &self.runs {
            let end = (idx + r as usize).min(n);
            if value {
                bits[idx..end].fill(true);
            }
            idx = end;
            value = !value;
        }
        bits
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        debug_assert!(row < self.height && col < self.width);
        let target = col as u64 * self.height as u64 + row as u64;
        let mut seen = 0u64;
        for (i, &r) in self.runs.iter().enumerate() {
            seen += r as u64;
            if target < seen {
                return i % 2 == 1;
            }
        }
        false
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&r| r as u64)
            .sum()
    }

    pub fn complement(&self) -> Self {
        let mut runs = Vec::with_capacity(self.runs.len() + 1);
        runs.push(0);
        runs.extend_from_slice(&self.runs);
        Self::from_runs(self.height, self.width, &runs).expect("complement preserves pixel count")
    }

    /// Foreground overlap with `other`, computed by walking both run
    /// streams without materializing bitmaps.
    pub fn intersection_area(&self, other: &RleMask) -> Result<u64> {
        self.check_shape(other)?;
        let total = self.height as u64 * self.width as u64;
        let mut inter = 0u64;
        let mut consumed = 0u64;
        let mut ia = 0usize;
        let mut ib = 0usize;
        let mut ra = 0u64; // remaining pixels in the current run of self
        let mut rb = 0u64;
        while consumed < total {
            while ra == 0 && ia < self.runs.len() {
                ra = self.runs[ia] as u64;
                ia += 1;
            }
            while rb == 0 && ib < other.runs.len() {
                rb = other.runs[ib] as u64;
                ib += 1;
            }
            if ra == 0 || rb == 0 {
                break;
            }
            let step = ra.min(rb);
            // run index parity: runs[i] is foreground iff i is odd, and
            // ia/ib point one past the active run.
            if ia.is_multiple_of(2) && ib.is_multiple_of(2) {
                inter += step;
            }
            ra -= step;
            rb -= step;
            consumed += step;
        }
        Ok(inter)
    }

    /// Mask IoU `|a AND b| / |a OR b|` in `[0, 1]`; zero when both masks are
    /// empty.
    pub fn iou(&self, other: &RleMask) -> Result<f64> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        if union == 0 {
            Ok(0.0)
        } else {
            Ok(inter as f64 / union as f64)
        }
    }

    fn check_shape(&self, other: &RleMask) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}
