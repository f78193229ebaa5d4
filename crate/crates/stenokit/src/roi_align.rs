//! RoI-Align: bilinear pooling of a feature map over a continuous region
//! of interest, without coordinate quantization.
//!
//! The coordinate convention is aligned (half-pixel): a continuous
//! coordinate `c` maps to pixel-index space as `c - 0.5`, so the center of
//! pixel `(0, 0)` sits at continuous `(0.5, 0.5)`. Samples falling outside
//! the map contribute zero through zero-padded bilinear weights.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Default samples per bin axis.
pub const DEFAULT_SAMPLING_RATIO: usize = 2;
/// Default pooled size feeding the box head.
pub const BOX_HEAD_POOL: (usize, usize) = (7, 7);
/// Default pooled size feeding the mask head.
pub const MASK_HEAD_POOL: (usize, usize) = (14, 14);

/// Dense feature tensor, channel-major layout
/// (`values[c * height * width + y * width + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "feature map has {} values, expected {channels} x {height} x {width} = {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite feature value".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            values: vec![value; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            values,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// Bilinear sample at pixel-index coordinates, with zero padding
    /// outside `[0, h-1] x [0, w-1]`.
    fn sample(&self, c: usize, py: f64, px: f64) -> f64 {
        let h = self.height as isize;
        let w = self.width as isize;
        if py <= -1.0 || py >= h as f64 || px <= -1.0 || px >= w as f64 {
            return 0.0;
        }
        let y0 = py.floor() as isize;
        let x0 = px.floor() as isize;
        let fy = py - y0 as f64;
        let fx = px - x0 as f64;
        let mut acc = 0.0;
        for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                let yy = y0 + dy;
                let xx = x0 + dx;
                if yy >= 0 && yy < h && xx >= 0 && xx < w {
                    acc += wy * wx * self.get(c, yy as usize, xx as usize);
                }
            }
        }
        acc
    }
}

/// Pools `roi` (continuous feature-map coordinates) into a
/// `channels x out_h x out_w` grid. Each output bin averages
/// `sampling_ratio^2` bilinear samples at regularly spaced points inside
/// the bin.
///
/// The RoI may extend beyond the map; outside samples contribute zero.
/// Negative-extent regions are unrepresentable — [`BBox`] construction
/// rejects them.
pub fn roi_align(
    fm: &FeatureMap,
    roi: &BBox,
    out_h: usize,
    out_w: usize,
    sampling_ratio: usize,
) -> Result<FeatureMap> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidConfig(format!(
            "pooled output must be non-empty, got {out_h} x {out_w}"
        )));
    }
    if sampling_ratio == 0 {
        return Err(Error::InvalidConfig("sampling_ratio must be >= 1".into()));
    }

    let bin_w = roi.width() / out_w as f64;
    let bin_h = roi.height() / out_h as f64;
    let sr = sampling_ratio as f64;
    let inv_count = 1.0 / (sr * sr);

    let mut values = Vec::with_capacity(fm.channels() * out_h * out_w);
    for c in 0..fm.channels() {
        for by in 0..out_h {
            for bx in 0..out_w {
                let mut acc = 0.0;
                for sy in 0..sampling_ratio {
                    let y = roi.y1() + bin_h * (by as f64 + (sy as f64 + 0.5) / sr);
                    for sx in 0..sampling_ratio {
                        let x = roi.x1() + bin_w * (bx as f64 + (sx as f64 + 0.5) / sr);
                        // aligned convention: continuous -> pixel index
                        acc += fm.sample(c, y - 0.5, x - 0.5);
                    }
                }
                values.push(acc * inv_count);
            }
        }
    }
    FeatureMap::new(fm.channels(), out_h, out_w, values)
}
