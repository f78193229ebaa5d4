//! Detection-level F1 and COCO-style segmentation mAP, plus the NMS
//! IoU-threshold sweep.
//!
//! F1 is detection-level and micro-averaged: detections match ground truth
//! greedily in descending score order, one-to-one, each taking the
//! highest-IoU unmatched same-class instance with IoU at or above the
//! matching threshold. The default matching measure is mask IoU at 0.5;
//! every knob (measure, threshold) is explicit so alternative conventions
//! can be evaluated side by side.
//!
//! seg-mAP follows the COCO convention: mask IoU thresholds 0.50:0.05:0.95,
//! 101-point interpolated precision, averaged over the classes present in
//! the ground truth (older 11-point interpolations yield different
//! numbers).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset_io::GtInstance;
use crate::error::{Error, Result};
use crate::postprocess::{
    canonical_cmp, run_pipeline_dataset, Detection, IouKind, PostProcessConfig,
};

/// How detections are matched to ground truth for F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Minimum IoU for a detection/ground-truth pair to match.
    pub iou_threshold: f64,
    /// Overlap measure used by the matcher.
    pub iou_kind: IouKind,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            iou_kind: IouKind::Mask,
        }
    }
}

/// Per-class true/false positive/negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub class_id: u32,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
}

/// Outcome of matching one detection set against one ground-truth set.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Matched `(detection index, ground-truth index)` pairs, ascending by
    /// detection index. One-to-one; every pair has IoU at or above the
    /// threshold.
    pub matches: Vec<(usize, usize)>,
    /// Detection indices left unmatched (false positives).
    pub unmatched_dets: Vec<usize>,
    /// Ground-truth indices left unmatched (false negatives).
    pub unmatched_gts: Vec<usize>,
    pub per_class: Vec<ClassCounts>,
    pub iou_threshold: f64,
    pub iou_kind: IouKind,
}

/// Evaluation summary: micro-averaged precision/recall/F1, per-class
/// breakdown, optional seg-mAP, and any sweep rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub per_class: Vec<ClassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg_map: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class_id: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// One row of the NMS-threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub nms_iou: f64,
    pub f1: f64,
}

fn det_gt_iou(det: &Detection, gt: &GtInstance, kind: IouKind) -> f64 {
    match kind {
        IouKind::Box => det.bbox.iou(&gt.bbox),
        IouKind::Mask => match (&det.mask, &gt.mask) {
            (Some(a), Some(b)) => a.iou(b).unwrap_or(0.0),
            _ => 0.0,
        },
    }
}

/// Greedy core shared by the matcher and the AP computation: walks
/// detections in the given priority order; each takes the highest-IoU
/// unmatched same-image candidate with IoU at or above the threshold (ties
/// by lowest ground-truth index). Returns, per walked detection, the
/// matched ground-truth index.
fn greedy_walk(
    dets: &[Detection],
    det_order: &[usize],
    gts: &[GtInstance],
    candidates: &HashMap<(u64, u32), Vec<usize>>,
    iou_threshold: f64,
    kind: IouKind,
) -> Vec<Option<usize>> {
    let mut gt_taken = vec![false; gts.len()];
    let mut out = Vec::with_capacity(det_order.len());
    for &di in det_order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        if let Some(pool) = candidates.get(&(det.image_id, det.class_id)) {
            for &gi in pool {
                if gt_taken[gi] {
                    continue;
                }
                let iou = det_gt_iou(det, &gts[gi], kind);
                if iou < iou_threshold {
                    continue;
                }
                match best {
                    Some((_, b)) if iou <= b => {}
                    _ => best = Some((gi, iou)),
                }
            }
        }
        if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            out.push(Some(gi));
        } else {
            out.push(None);
        }
    }
    out
}

fn gt_candidates(gts: &[GtInstance]) -> HashMap<(u64, u32), Vec<usize>> {
    let mut map: HashMap<(u64, u32), Vec<usize>> = HashMap::new();
    for (gi, gt) in gts.iter().enumerate() {
        map.entry((gt.image_id, gt.class_id)).or_default().push(gi);
    }
    map
}

/// Canonical detection priority: descending score with content tie-breaks,
/// so matching is invariant to input permutation.
fn canonical_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| canonical_cmp(&dets[i], &dets[j]).then(i.cmp(&j)));
    order
}

/// Matches detections to ground truth greedily in descending score order,
/// one-to-one, same class and image only.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GtInstance],
    iou_threshold: f64,
    iou_kind: IouKind,
) -> MatchResult {
    let order = canonical_order(dets);
    let candidates = gt_candidates(gts);
    let assignment = greedy_walk(dets, &order, gts, &candidates, iou_threshold, iou_kind);

    let mut matches = Vec::new();
    let mut unmatched_dets = Vec::new();
    let mut gt_matched = vec![false; gts.len()];
    for (&di, assigned) in order.iter().zip(&assignment) {
        match assigned {
            Some(gi) => {
                matches.push((di, *gi));
                gt_matched[*gi] = true;
            }
            None => unmatched_dets.push(di),
        }
    }
    matches.sort_unstable();
    unmatched_dets.sort_unstable();
    let unmatched_gts: Vec<usize> = (0..gts.len()).filter(|&gi| !gt_matched[gi]).collect();

    let mut by_class: HashMap<u32, ClassCounts> = HashMap::new();
    fn class_entry(map: &mut HashMap<u32, ClassCounts>, class_id: u32) -> &mut ClassCounts {
        map.entry(class_id).or_insert(ClassCounts {
            class_id,
            tp: 0,
            fp: 0,
            fn_count: 0,
        })
    }
    for &(di, _) in &matches {
        class_entry(&mut by_class, dets[di].class_id).tp += 1;
    }
    for &di in &unmatched_dets {
        class_entry(&mut by_class, dets[di].class_id).fp += 1;
    }
    for &gi in &unmatched_gts {
        class_entry(&mut by_class, gts[gi].class_id).fn_count += 1;
    }
    let mut per_class: Vec<ClassCounts> = by_class.into_values().collect();
    per_class.sort_by_key(|c| c.class_id);

    MatchResult {
        matches,
        unmatched_dets,
        unmatched_gts,
        per_class,
        iou_threshold,
        iou_kind,
    }
}

fn prf(tp: usize, fp: usize, fn_count: usize) -> (f64, f64, f64) {
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_count > 0 {
        tp as f64 / (tp + fn_count) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Micro-averaged precision/recall/F1 over the whole dataset, with a
/// per-class breakdown.
pub fn f1_score(matched: &MatchResult) -> EvalReport {
    let tp = matched.matches.len();
    let fp = matched.unmatched_dets.len();
    let fn_count = matched.unmatched_gts.len();
    let (precision, recall, f1) = prf(tp, fp, fn_count);
    let per_class = matched
        .per_class
        .iter()
        .map(|c| {
            let (p, r, f) = prf(c.tp, c.fp, c.fn_count);
            ClassReport {
                class_id: c.class_id,
                precision: p,
                recall: r,
                f1: f,
                true_positives: c.tp,
                false_positives: c.fp,
                false_negatives: c.fn_count,
            }
        })
        .collect();
    EvalReport {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        per_class,
        seg_map: None,
        sweep: Vec::new(),
    }
}

/// The COCO mask-IoU thresholds 0.50:0.05:0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (50..=95).step_by(5).map(|v| v as f64 / 100.0).collect()
}

/// 101-point interpolated average precision from per-detection hit flags in
/// descending score order.
fn average_precision(hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let n = hits.len();
    let mut recall = Vec::with_capacity(n);
    let mut precision = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (i, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // precision envelope: non-increasing from the right
    for i in (0..n.saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut acc = 0.0;
    let mut idx = 0usize;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        while idx < n && recall[idx] < r {
            idx += 1;
        }
        if idx < n {
            acc += precision[idx];
        }
    }
    acc / 101.0
}

/// COCO-style segmentation mAP: mask IoU thresholds 0.50:0.05:0.95,
/// 101-point interpolation, averaged over classes present in the ground
/// truth. Every detection (and ground-truth instance) must carry a mask.
pub fn seg_map(dets: &[Detection], gts: &[GtInstance]) -> Result<f64> {
    for d in dets {
        if d.mask.is_none() {
            return Err(Error::MissingMask {
                image_id: d.image_id,
            });
        }
    }
    for g in gts {
        if g.mask.is_none() {
            return Err(Error::MissingMask {
                image_id: g.image_id,
            });
        }
    }

    let mut gt_classes: Vec<u32> = gts.iter().map(|g| g.class_id).collect();
    gt_classes.sort_unstable();
    gt_classes.dedup();
    if gt_classes.is_empty() {
        return Ok(0.0);
    }

    let candidates = gt_candidates(gts);
    let order = canonical_order(dets);
    let thresholds = coco_iou_thresholds();

    let mut ap_sum = 0.0;
    let mut ap_count = 0usize;
    for &class_id in &gt_classes {
        let class_order: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&di| dets[di].class_id == class_id)
            .collect();
        let num_gt = gts.iter().filter(|g| g.class_id == class_id).count();
        for &t in &thresholds {
            let assignment = greedy_walk(dets, &class_order, gts, &candidates, t, IouKind::Mask);
            let hits: Vec<bool> = assignment.iter().map(|a| a.is_some()).collect();
            ap_sum += average_precision(&hits, num_gt);
            ap_count += 1;
        }
    }
    Ok(ap_sum / ap_count as f64)
}

/// Runs the full post-processing pipeline at each NMS threshold in turn and
/// scores F1, emitting one row per threshold in input order.
pub fn threshold_sweep(
    raw_dets: &[Detection],
    gts: &[GtInstance],
    base: &PostProcessConfig,
    nms_kind: IouKind,
    matching: &MatchConfig,
    thresholds: &[f64],
) -> Vec<SweepRow> {
    thresholds
        .iter()
        .map(|&t| {
            let cfg = PostProcessConfig {
                nms_iou: t,
                ..*base
            };
            let (kept, _) = run_pipeline_dataset(raw_dets, &cfg, nms_kind);
            let matched = match_detections(&kept, gts, matching.iou_threshold, matching.iou_kind);
            SweepRow {
                nms_iou: t,
                f1: f1_score(&matched).f1,
            }
        })
        .collect()
}

impl EvalReport {
    /// Plain-text table for operator output.
    pub fn to_table(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>10}", "metric", "value");
        let _ = writeln!(s, "{:<12} {:>10.4}", "precision", self.precision);
        let _ = writeln!(s, "{:<12} {:>10.4}", "recall", self.recall);
        let _ = writeln!(s, "{:<12} {:>10.4}", "f1", self.f1);
        let _ = writeln!(
            s,
            "{:<12} {:>10}",
            "tp/fp/fn",
            format!(
                "{}/{}/{}",
                self.true_positives, self.false_positives, self.false_negatives
            )
        );
        if let Some(m) = self.seg_map {
            let _ = writeln!(s, "{:<12} {:>10.4}", "seg_map", m);
        }
        if self.per_class.len() > 1 {
            let _ = writeln!(s, "per class:");
            for c in &self.per_class {
                let _ = writeln!(
                    s,
                    "  class {:<5} p={:.4} r={:.4} f1={:.4} ({}/{}/{})",
                    c.class_id,
                    c.precision,
                    c.recall,
                    c.f1,
                    c.true_positives,
                    c.false_positives,
                    c.false_negatives
                );
            }
        }
        if !self.sweep.is_empty() {
            let _ = writeln!(s, "sweep:");
            for row in &self.sweep {
                let _ = writeln!(s, "  nms_iou={:.2} f1={:.4}", row.nms_iou, row.f1);
            }
        }
        s
    }
}
