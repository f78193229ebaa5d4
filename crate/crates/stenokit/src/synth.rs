//! Deterministic synthetic fixtures: ground-truth scenes of convex
//! polygonal blobs plus detections derived from them by controllable
//! corruption (box jitter, score assignment, near-duplicates, dropout).
//!
//! The generator plants its own answer key — which detections are true
//! positives, which are redundant duplicates, and which instances were
//! dropped — so metric tests have ground truth that is independent of the
//! matcher. With zero noise the detections equal the ground truth with
//! score 1.0.
//!
//! Instances are placed on disjoint grid cells, so detections can only
//! interact with their own instance: a planted duplicate sits at box IoU
//! 0.9 of its original and at zero IoU of everything else. The planted
//! counts survive the default post-processing chain as long as
//! `tp_score_range` stays at or above the confidence threshold and the
//! per-image instance count stays within the detection cap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{
    CocoAnnotation, CocoCategory, CocoImage, DetectionFile, DetectionRecord, GroundTruthSet,
    Segmentation,
};
use crate::error::{Error, Result};
use crate::geometry::Polygon;

/// Generator settings. `Default` is the zero-noise configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_images: usize,
    /// Square canvas side in pixels.
    pub image_size: u32,
    /// Inclusive range of instances per image (at most 16, the placement
    /// grid capacity).
    pub instances_per_image: (usize, usize),
    /// Box/mask translation noise amplitude in pixels, uniform per axis.
    pub jitter: f64,
    /// Uniform score range for planted true positives.
    pub tp_score_range: (f64, f64),
    /// Uniform score range for planted duplicates.
    pub dup_score_range: (f64, f64),
    /// Probability that a kept detection also emits a near-duplicate.
    pub duplicate_rate: f64,
    /// Probability that an instance gets no detection at all.
    pub dropout_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_images: 8,
            image_size: 512,
            instances_per_image: (1, 3),
            jitter: 0.0,
            tp_score_range: (1.0, 1.0),
            dup_score_range: (0.8, 0.85),
            duplicate_rate: 0.0,
            dropout_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.image_size < 64 {
            issues.push("image_size must be at least 64".to_string());
        }
        let (lo, hi) = self.instances_per_image;
        if lo > hi {
            issues.push("instances_per_image range is inverted".to_string());
        }
        if hi > 16 {
            issues.push("instances_per_image max is 16 (placement grid capacity)".to_string());
        }
        for (name, rate) in [
            ("duplicate_rate", self.duplicate_rate),
            ("dropout_rate", self.dropout_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                issues.push(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, (a, b)) in [
            ("tp_score_range", self.tp_score_range),
            ("dup_score_range", self.dup_score_range),
        ] {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                issues.push(format!("{name} must be an ordered subrange of [0, 1]"));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            issues.push("jitter must be finite and non-negative".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

/// The generator's answer key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlantedCounts {
    /// Detections derived from an instance (expected to match it).
    pub true_positives: usize,
    /// Redundant duplicate detections (expected to stay unmatched).
    pub false_positives: usize,
    /// Instances dropped from the detections (expected to stay unmatched).
    pub false_negatives: usize,
}

/// A generated fixture pair plus its answer key.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub ground_truth: GroundTruthSet,
    pub detections: DetectionFile,
    pub planted: PlantedCounts,
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        lo + rng.gen::<f64>() * (hi - lo)
    }
}

fn sample_count(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if lo >= hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Convex blob: vertices on an ellipse at jittered, strictly increasing
/// angles.
fn blob_polygon(rng: &mut ChaCha8Rng, cx: f64, cy: f64, rx: f64, ry: f64) -> Polygon {
    let k = rng.gen_range(5..=9);
    let verts: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let theta = std::f64::consts::TAU * (i as f64 + rng.gen::<f64>() * 0.9) / k as f64;
            (cx + rx * theta.cos(), cy + ry * theta.sin())
        })
        .collect();
    Polygon::new(verts).expect("blob has >= 5 finite vertices")
}

fn annotation_from_polygon(
    poly: &Polygon,
    id: u64,
    image_id: u64,
    category_id: u32,
    image_size: u32,
) -> Result<CocoAnnotation> {
    let mask = poly.to_mask(image_size, image_size)?;
    let bbox = poly
        .bounds()
        .clip(image_size as f64, image_size as f64)
        .to_xywh();
    Ok(CocoAnnotation {
        id,
        image_id,
        category_id,
        segmentation: Segmentation::Polygons(vec![poly.to_flat()]),
        bbox,
        area: mask.area() as f64,
        iscrowd: 0,
    })
}

/// Generates a seed-deterministic ground-truth/detections pair. Identical
/// configs produce byte-identical files.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let size = cfg.image_size as f64;
    let cell = size / 4.0;

    let mut images = Vec::with_capacity(cfg.num_images);
    let mut annotations = Vec::new();
    let mut detections = Vec::new();
    let mut planted = PlantedCounts::default();
    let mut next_ann_id = 1u64;

    for img_idx in 0..cfg.num_images {
        let image_id = img_idx as u64 + 1;
        images.push(CocoImage {
            id: image_id,
            width: cfg.image_size,
            height: cfg.image_size,
            file_name: format!("synth_{image_id:06}.png"),
        });

        let n = sample_count(&mut rng, cfg.instances_per_image);
        // n distinct cells of the 4x4 placement grid
        let mut cells: Vec<usize> = (0..16).collect();
        for i in 0..n {
            let j = rng.gen_range(i..16);
            cells.swap(i, j);
        }

        for &cell_idx in &cells[..n] {
            let col = (cell_idx % 4) as f64;
            let row = (cell_idx / 4) as f64;
            let cx = (col + 0.5) * cell + (rng.gen::<f64>() - 0.5) * cell * 0.1;
            let cy = (row + 0.5) * cell + (rng.gen::<f64>() - 0.5) * cell * 0.1;
            let rx = cell * (0.15 + rng.gen::<f64>() * 0.15);
            let ry = cell * (0.15 + rng.gen::<f64>() * 0.15);
            let poly = blob_polygon(&mut rng, cx, cy, rx, ry);

            let ann =
                annotation_from_polygon(&poly, next_ann_id, image_id, 1, cfg.image_size)?;
            next_ann_id += 1;

            if rng.gen::<f64>() < cfg.dropout_rate {
                planted.false_negatives += 1;
                annotations.push(ann);
                continue;
            }

            let (dx, dy) = if cfg.jitter > 0.0 {
                (
                    (rng.gen::<f64>() * 2.0 - 1.0) * cfg.jitter,
                    (rng.gen::<f64>() * 2.0 - 1.0) * cfg.jitter,
                )
            } else {
                (0.0, 0.0)
            };
            let det_poly = poly.translate(dx, dy);
            let det_bbox = det_poly
                .bounds()
                .clip(size, size)
                .to_xywh();
            let score = sample_range(&mut rng, cfg.tp_score_range);
            detections.push(DetectionRecord {
                image_id,
                category_id: 1,
                score,
                bbox: det_bbox,
                segmentation: Some(Segmentation::Polygons(vec![det_poly.to_flat()])),
            });
            planted.true_positives += 1;

            if rng.gen::<f64>() < cfg.duplicate_rate {
                // pure x-shift by w/19 puts the duplicate at box IoU
                // (w - d) / (w + d) = 0.9 of its original
                let shift = det_bbox[2] / 19.0;
                let dup_poly = det_poly.translate(shift, 0.0);
                let dup_bbox = dup_poly.bounds().clip(size, size).to_xywh();
                let dup_score = sample_range(&mut rng, cfg.dup_score_range);
                detections.push(DetectionRecord {
                    image_id,
                    category_id: 1,
                    score: dup_score,
                    bbox: dup_bbox,
                    segmentation: Some(Segmentation::Polygons(vec![dup_poly.to_flat()])),
                });
                planted.false_positives += 1;
            }

            annotations.push(ann);
        }
    }

    let mut ground_truth = GroundTruthSet {
        images,
        annotations,
        categories: vec![CocoCategory {
            id: 1,
            name: "stenosis".into(),
            supercategory: None,
        }],
    };
    ground_truth.validate_and_normalize()?;

    Ok(SynthOutput {
        ground_truth,
        detections: DetectionFile::new(detections),
        planted,
    })
}
