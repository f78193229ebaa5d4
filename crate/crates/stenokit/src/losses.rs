//! The detector's multi-task training loss and its three terms:
//! cross-entropy classification, L1 box regression in `xywh`, and averaged
//! binary cross-entropy over the mask grids — plus the positive-RoI
//! assignment rule and mask-target construction.
//!
//! Conventions fixed here:
//! - Probabilities are clamped to `[1e-12, 1 - 1e-12]` before any log, so
//!   the losses stay finite at the `{0, 1}` endpoints.
//! - The classification term is averaged over all RoIs in the batch; the
//!   box and mask terms are computed over positive RoIs only.
//! - The mask term is the pixel-mean binary cross-entropy per mask,
//!   averaged over the `N` positive masks. The per-pixel-sum alternative is
//!   rejected because it would make the loss resolution-dependent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, RleMask};

/// Floor/ceiling distance applied to probabilities before logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// An RoI is positive iff its best IoU against the ground-truth boxes
/// reaches this value (boundary inclusive).
pub const POSITIVE_IOU_THRESHOLD: f64 = 0.5;

/// Dense `height x width` grid; the carrier for mask probabilities
/// (`Grid<f64>`) and binary mask targets (`Grid<bool>`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} entries, expected {height} x {width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }
}

#[derive(Deserialize)]
struct GridRaw<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Grid<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GridRaw::<T>::deserialize(d)?;
        Grid::new(raw.height, raw.width, raw.data).map_err(serde::de::Error::custom)
    }
}

/// Gain coefficients for the weighted sum of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossGains {
    pub lambda_cls: f64,
    pub lambda_box: f64,
    pub lambda_mask: f64,
}

impl Default for LossGains {
    fn default() -> Self {
        Self {
            lambda_cls: 1.0,
            lambda_box: 1.0,
            lambda_mask: 1.0,
        }
    }
}

/// One sampled RoI with its matched prediction/target tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSample {
    /// Probability vector over classes; entries in `[0, 1]`, summing to 1
    /// within 1e-6.
    pub class_probs: Vec<f64>,
    pub true_class: usize,
    /// Predicted box in `xywh`.
    pub pred_box: [f64; 4],
    /// Target box in `xywh`.
    pub true_box: [f64; 4],
    /// Per-pixel foreground probabilities on the mask grid.
    pub pred_mask: Grid<f64>,
    /// Binary target on the same grid.
    pub target_mask: Grid<bool>,
    pub is_positive: bool,
}

impl RoiSample {
    /// Checks the documented invariants, collecting every violation.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.true_class >= self.class_probs.len() {
            issues.push(format!(
                "true_class {} out of range for {} classes",
                self.true_class,
                self.class_probs.len()
            ));
        }
        if self.class_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            issues.push("class_probs entries must lie in [0, 1]".into());
        }
        let sum: f64 = self.class_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            issues.push(format!("class_probs sum to {sum}, expected 1 within 1e-6"));
        }
        if self
            .pred_mask
            .data()
            .iter()
            .any(|&p| !(0.0..=1.0).contains(&p))
        {
            issues.push("pred_mask entries must lie in [0, 1]".into());
        }
        if self.pred_mask.shape() != self.target_mask.shape() {
            issues.push(format!(
                "pred_mask shape {:?} differs from target_mask shape {:?}",
                self.pred_mask.shape(),
                self.target_mask.shape()
            ));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

/// Per-term loss values for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cls: f64,
    pub r#box: f64,
    pub mask: f64,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// One-hot cross-entropy `-log p[true_class]`, the collapsed form of the
/// sum-over-classes definition. Probabilities are floored at [`PROB_CLAMP`]
/// before the log.
pub fn cls_loss(class_probs: &[f64], true_class: usize) -> Result<f64> {
    let p = class_probs.get(true_class).ok_or(Error::IndexOutOfRange {
        index: true_class,
        len: class_probs.len(),
    })?;
    Ok(-p.max(PROB_CLAMP).ln())
}

/// General soft-label cross-entropy `-sum_i y_i log p_i`; reduces to
/// [`cls_loss`] for one-hot targets.
pub fn cls_loss_soft(class_probs: &[f64], targets: &[f64]) -> Result<f64> {
    if class_probs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} targets",
            class_probs.len(),
            targets.len()
        )));
    }
    Ok(class_probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| -y * p.max(PROB_CLAMP).ln())
        .sum())
}

/// L1 box loss in the `xywh` parameterization:
/// `|x-x'| + |y-y'| + |w-w'| + |h-h'|`.
pub fn box_loss(pred: &[f64; 4], target: &[f64; 4]) -> f64 {
    pred.iter().zip(target).map(|(&p, &t)| (p - t).abs()).sum()
}

/// Averaged binary cross-entropy over `N` masks: per mask the pixel-mean of
/// `-(y log p + (1-y) log(1-p))`, then the mean over masks.
pub fn mask_loss(pred_masks: &[Grid<f64>], target_masks: &[Grid<bool>]) -> Result<f64> {
    if pred_masks.is_empty() {
        return Err(Error::EmptyBatch(
            "mask loss is undefined on zero masks (no positive RoIs)",
        ));
    }
    if pred_masks.len() != target_masks.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted masks vs {} targets",
            pred_masks.len(),
            target_masks.len()
        )));
    }
    let mut acc = 0.0;
    for (pred, target) in pred_masks.iter().zip(target_masks) {
        if pred.shape() != target.shape() {
            return Err(Error::ShapeMismatch(format!(
                "mask grid {:?} vs target grid {:?}",
                pred.shape(),
                target.shape()
            )));
        }
        let mut per_mask = 0.0;
        for (&p, &y) in pred.data().iter().zip(target.data()) {
            let p = clamp_prob(p);
            per_mask -= if y { p.ln() } else { (1.0 - p).ln() };
        }
        acc += per_mask / pred.data().len() as f64;
    }
    Ok(acc / pred_masks.len() as f64)
}

/// The multi-task loss: `total = λc·cls + λb·box + λm·mask`, with the
/// classification term averaged over every RoI and the box/mask terms over
/// positive RoIs only (zero when the batch has no positives).
pub fn total_loss(samples: &[RoiSample], gains: &LossGains) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch("loss of an empty RoI batch"));
    }
    let mut cls_sum = 0.0;
    for s in samples {
        cls_sum += cls_loss(&s.class_probs, s.true_class)?;
    }
    let cls = cls_sum / samples.len() as f64;

    let positives: Vec<&RoiSample> = samples.iter().filter(|s| s.is_positive).collect();
    let (box_term, mask_term) = if positives.is_empty() {
        (0.0, 0.0)
    } else {
        let box_term = positives
            .iter()
            .map(|s| box_loss(&s.pred_box, &s.true_box))
            .sum::<f64>()
            / positives.len() as f64;
        let preds: Vec<Grid<f64>> = positives.iter().map(|s| s.pred_mask.clone()).collect();
        let targets: Vec<Grid<bool>> = positives.iter().map(|s| s.target_mask.clone()).collect();
        (box_term, mask_loss(&preds, &targets)?)
    };

    Ok(LossBreakdown {
        total: gains.lambda_cls * cls + gains.lambda_box * box_term + gains.lambda_mask * mask_term,
        cls,
        r#box: box_term,
        mask: mask_term,
    })
}

/// Positive-RoI rule: positive iff the maximum IoU over the ground-truth
/// boxes reaches [`POSITIVE_IOU_THRESHOLD`] (boundary inclusive). Returns
/// the argmax index for positive RoIs, ties broken by lowest index.
pub fn assign_positive(roi: &BBox, gt_boxes: &[BBox]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, gt) in gt_boxes.iter().enumerate() {
        let iou = roi.iou(gt);
        match best {
            Some((_, b)) if iou <= b => {}
            _ => best = Some((i, iou)),
        }
    }
    best.filter(|&(_, iou)| iou >= POSITIVE_IOU_THRESHOLD)
        .map(|(i, _)| i)
}

/// Builds the mask-head training target for a positive RoI: the
/// ground-truth mask cropped to the RoI (their intersection) and resampled
/// to `out_h x out_w` by nearest neighbor on pixel centers.
pub fn mask_target(
    roi: &BBox,
    gt_mask: &RleMask,
    out_h: usize,
    out_w: usize,
) -> Result<Grid<bool>> {
    if roi.width() <= 0.0 || roi.height() <= 0.0 {
        return Err(Error::InvalidRoi(format!(
            "degenerate RoI {:?} has no interior to sample",
            roi.to_xywh()
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidRoi(format!(
            "mask target must be non-empty, got {out_h} x {out_w}"
        )));
    }
    let bits = gt_mask.decode();
    let h = gt_mask.height() as i64;
    let w = gt_mask.width() as i64;
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = roi.y1() + (i as f64 + 0.5) * roi.height() / out_h as f64;
        let row = y.floor() as i64;
        for j in 0..out_w {
            let x = roi.x1() + (j as f64 + 0.5) * roi.width() / out_w as f64;
            let col = x.floor() as i64;
            let fg = row >= 0
                && row < h
                && col >= 0
                && col < w
                && bits[col as usize * h as usize + row as usize];
            data.push(fg);
        }
    }
    Grid::new(out_h, out_w, data)
}
