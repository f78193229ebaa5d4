//! Region-proposal anchor grids and box-delta decoding.
//!
//! Anchors tile a feature map with prior boxes of fixed area and aspect
//! ratio. The defaults are the tuned proposal settings for the stenosis
//! task: sizes `[4, 8, 16, 32, 64]` and height/width ratios
//! `[0.5, 1.0, 2.0]`. The level-to-size assignment is not pinned down by
//! those settings alone, so it is a documented choice here: with a single
//! configured stride every size lives on that level; with several strides
//! the sizes are dealt round-robin across them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Upper clamp for width/height deltas before exponentiation, guarding
/// `exp` overflow on adversarial regression outputs.
pub const DELTA_CLAMP: f64 = 4.135166556742356; // ln(1000 / 16)

/// Anchor-grid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// Anchor scales in pixels; each anchor has area `size^2`.
    pub sizes: Vec<f64>,
    /// Height/width aspect ratios.
    pub ratios: Vec<f64>,
    /// Feature-map strides in pixels, one per pyramid level.
    pub strides: Vec<u32>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            sizes: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            ratios: vec![0.5, 1.0, 2.0],
            strides: vec![16],
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.ratios.is_empty() || self.strides.is_empty() {
            return Err(Error::InvalidConfig(
                "anchor sizes, ratios, and strides must be non-empty".into(),
            ));
        }
        if self.sizes.iter().any(|&s| s <= 0.0 || s.is_nan()) {
            return Err(Error::InvalidConfig("anchor sizes must be positive".into()));
        }
        if self.ratios.iter().any(|&r| r <= 0.0 || r.is_nan()) {
            return Err(Error::InvalidConfig("anchor ratios must be positive".into()));
        }
        if self.strides.contains(&0) {
            return Err(Error::InvalidConfig("strides must be positive".into()));
        }
        Ok(())
    }

    /// Sizes assigned to the level with the given stride: all sizes when a
    /// single stride is configured, round-robin otherwise. A stride not in
    /// the config gets every size.
    pub fn sizes_for_stride(&self, stride: u32) -> Vec<f64> {
        if self.strides.len() <= 1 {
            return self.sizes.clone();
        }
        match self.strides.iter().position(|&s| s == stride) {
            Some(level) => self
                .sizes
                .iter()
                .enumerate()
                .filter(|(i, _)| i % self.strides.len() == level)
                .map(|(_, &s)| s)
                .collect(),
            None => self.sizes.clone(),
        }
    }
}

/// Tiles anchors over a `level_height x level_width` feature map.
///
/// Each anchor is centered at `((col + 0.5) * stride, (row + 0.5) * stride)`
/// with area `size^2` and height/width equal to the configured ratio.
/// Ordering is row-major by cell, then size, then ratio.
pub fn generate_anchors(
    cfg: &AnchorConfig,
    level_height: u32,
    level_width: u32,
    stride: u32,
) -> Result<Vec<BBox>> {
    cfg.validate()?;
    if level_height == 0 || level_width == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "anchor grid dimensions and stride must be positive".into(),
        ));
    }
    let sizes = cfg.sizes_for_stride(stride);
    let mut anchors = Vec::with_capacity(
        level_height as usize * level_width as usize * sizes.len() * cfg.ratios.len(),
    );
    for row in 0..level_height {
        for col in 0..level_width {
            let cx = (col as f64 + 0.5) * stride as f64;
            let cy = (row as f64 + 0.5) * stride as f64;
            for &size in &sizes {
                for &ratio in &cfg.ratios {
                    // area = size^2 and h/w = ratio  =>  w = size / sqrt(ratio)
                    let w = size / ratio.sqrt();
                    let h = size * ratio.sqrt();
                    anchors.push(BBox::new_unchecked(
                        cx - w / 2.0,
                        cy - h / 2.0,
                        cx + w / 2.0,
                        cy + h / 2.0,
                    ));
                }
            }
        }
    }
    Ok(anchors)
}

/// Applies regressed `(dx, dy, dw, dh)` deltas to an anchor: the center
/// shifts by `(dx * w, dy * h)` and the sides scale by `exp(dw)`, `exp(dh)`
/// (clamped to [`DELTA_CLAMP`] first).
pub fn decode_deltas(anchor: &BBox, deltas: (f64, f64, f64, f64)) -> BBox {
    let (dx, dy, dw, dh) = deltas;
    let w = anchor.width();
    let h = anchor.height();
    let (cx, cy) = anchor.center();
    let new_cx = cx + dx * w;
    let new_cy = cy + dy * h;
    let new_w = w * dw.min(DELTA_CLAMP).exp();
    let new_h = h * dh.min(DELTA_CLAMP).exp();
    BBox::new_unchecked(
        new_cx - new_w / 2.0,
        new_cy - new_h / 2.0,
        new_cx + new_w / 2.0,
        new_cy + new_h / 2.0,
    )
}

/// Clamps every box to the `[0, width] x [0, height]` canvas, preserving
/// order.
pub fn clip_boxes(boxes: &[BBox], height: u32, width: u32) -> Vec<BBox> {
    boxes
        .iter()
        .map(|b| b.clip(height as f64, width as f64))
        .collect()
}
