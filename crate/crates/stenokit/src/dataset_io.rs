//! COCO-format ground truth, the detections interchange file, and
//! deterministic dataset splitting.
//!
//! Two file formats cross the toolkit boundary:
//!
//! - Ground truth: standard COCO JSON with `images`, `annotations`, and
//!   `categories` arrays (the ARCADE annotation form).
//! - Detections: the COCO-results record shape
//!   `{image_id, category_id, score, bbox: [x, y, w, h], segmentation}`.
//!   The canonical file is an object `{"$schema": ..., "detections": [...]}`
//!   so the format is versioned; a bare COCO-results array is accepted on
//!   input for compatibility with stock exporters.
//!
//! Validation collects every violation before failing: evaluation jobs are
//! batch jobs, and partial error reports waste runs.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Polygon, RleMask};
use crate::postprocess::Detection;

/// Version tag written into canonical detections files.
pub const DETECTIONS_SCHEMA: &str = "stenokit/detections/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

/// COCO segmentation payload: either one or more polygons in the flat
/// `[x0, y0, x1, y1, ...]` form, or an uncompressed RLE with
/// `size = [height, width]` and column-major counts starting with a
/// background run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [u32; 2], counts: Vec<u32> },
}

impl Segmentation {
    /// Rasterizes to a mask at the given image resolution. Multiple
    /// polygons union together.
    pub fn to_mask(&self, height: u32, width: u32) -> Result<RleMask> {
        match self {
            Segmentation::Rle { size, counts } => {
                if size[0] != height || size[1] != width {
                    return Err(Error::ShapeMismatch(format!(
                        "RLE size {}x{} vs image {height}x{width}",
                        size[0], size[1]
                    )));
                }
                RleMask::from_runs(height, width, counts)
            }
            Segmentation::Polygons(polys) => {
                let mut bits = vec![false; height as usize * width as usize];
                for flat in polys {
                    let mask = Polygon::from_flat(flat)?.to_mask(height, width)?;
                    for (slot, b) in bits.iter_mut().zip(mask.decode()) {
                        *slot |= b;
                    }
                }
                RleMask::encode(&bits, height, width)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    pub segmentation: Segmentation,
    /// `[x, y, w, h]`, clipped to the image bounds at load.
    pub bbox: [f64; 4],
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
}

/// A parsed, validated COCO ground-truth set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSet {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// One ground-truth instance in evaluation form. The mask is rasterized on
/// demand ([`GroundTruthSet::instances`]) rather than at load.
#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub image_id: u64,
    pub class_id: u32,
    pub bbox: BBox,
    pub mask: Option<RleMask>,
}

impl GroundTruthSet {
    pub fn image_map(&self) -> HashMap<u64, &CocoImage> {
        self.images.iter().map(|im| (im.id, im)).collect()
    }

    /// Checks referential integrity and field ranges, collecting every
    /// violation, and clips annotation boxes to their image bounds.
    pub fn validate_and_normalize(&mut self) -> Result<()> {
        let mut issues = Vec::new();

        let mut image_ids = HashSet::new();
        for im in &self.images {
            if !image_ids.insert(im.id) {
                issues.push(format!("duplicate image id {}", im.id));
            }
            if im.width == 0 || im.height == 0 {
                issues.push(format!("image {} has zero dimension", im.id));
            }
        }
        let mut category_ids = HashSet::new();
        for cat in &self.categories {
            if !category_ids.insert(cat.id) {
                issues.push(format!("duplicate category id {}", cat.id));
            }
        }
        let dims: HashMap<u64, (u32, u32)> = self
            .images
            .iter()
            .map(|im| (im.id, (im.height, im.width)))
            .collect();

        let mut ann_ids = HashSet::new();
        for ann in &mut self.annotations {
            if !ann_ids.insert(ann.id) {
                issues.push(format!("duplicate annotation id {}", ann.id));
            }
            if !category_ids.contains(&ann.category_id) {
                issues.push(format!(
                    "annotation {} references missing category {}",
                    ann.id, ann.category_id
                ));
            }
            let Some(&(h, w)) = dims.get(&ann.image_id) else {
                issues.push(format!(
                    "annotation {} references missing image {}",
                    ann.id, ann.image_id
                ));
                continue;
            };
            if ann.area <= 0.0 || ann.area.is_nan() {
                issues.push(format!("annotation {} has non-positive area", ann.id));
            }
            // Clip only boxes that actually spill out, so normalization is a
            // fixpoint: in-bounds boxes keep their exact stored bytes.
            let [bx, by, bw, bh] = ann.bbox;
            let in_bounds = bx >= 0.0
                && by >= 0.0
                && bw >= 0.0
                && bh >= 0.0
                && bx + bw <= w as f64
                && by + bh <= h as f64
                && ann.bbox.iter().all(|v| v.is_finite());
            if !in_bounds {
                match BBox::from_xywh(bx, by, bw, bh) {
                    Ok(b) => ann.bbox = b.clip(h as f64, w as f64).to_xywh(),
                    Err(e) => issues.push(format!("annotation {}: {e}", ann.id)),
                }
            }
            match &ann.segmentation {
                Segmentation::Polygons(polys) => {
                    if polys.is_empty() {
                        issues.push(format!("annotation {} has no polygons", ann.id));
                    }
                    for poly in polys {
                        if poly.len() < 6 || poly.len() % 2 != 0 {
                            issues.push(format!(
                                "annotation {} polygon has {} coordinates (need an even count >= 6)",
                                ann.id,
                                poly.len()
                            ));
                        }
                    }
                }
                Segmentation::Rle { size, counts } => {
                    let sum: u64 = counts.iter().map(|&c| c as u64).sum();
                    if size[0] != h || size[1] != w {
                        issues.push(format!(
                            "annotation {} RLE size {}x{} vs image {h}x{w}",
                            ann.id, size[0], size[1]
                        ));
                    } else if sum != h as u64 * w as u64 {
                        issues.push(format!(
                            "annotation {} RLE runs sum to {sum}, expected {}",
                            ann.id,
                            h as u64 * w as u64
                        ));
                    }
                }
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Evaluation-form instances. With `rasterize_masks` the segmentation of
    /// every annotation is rendered at image resolution; otherwise masks
    /// stay `None` and only boxes are available.
    pub fn instances(&self, rasterize_masks: bool) -> Result<Vec<GtInstance>> {
        let dims = self.image_map();
        let mut out = Vec::with_capacity(self.annotations.len());
        for ann in &self.annotations {
            let im = dims.get(&ann.image_id).ok_or_else(|| {
                Error::Validation(vec![format!(
                    "annotation {} references missing image {}",
                    ann.id, ann.image_id
                )])
            })?;
            let mask = if rasterize_masks {
                Some(ann.segmentation.to_mask(im.height, im.width)?)
            } else {
                None
            };
            out.push(GtInstance {
                image_id: ann.image_id,
                class_id: ann.category_id,
                bbox: BBox::from_xywh(ann.bbox[0], ann.bbox[1], ann.bbox[2], ann.bbox[3])?,
                mask,
            });
        }
        Ok(out)
    }
}

/// One record of the detections interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: u64,
    pub category_id: u32,
    pub score: f64,
    pub bbox: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
}

impl DetectionRecord {
    /// Converts to the pipeline type. Polygon segmentations rasterize only
    /// when image dimensions are supplied; RLE segmentations carry their
    /// own. Without either, the detection has no mask.
    pub fn to_detection(&self, image_dims: Option<(u32, u32)>) -> Result<Detection> {
        let bbox = BBox::from_xywh(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])?;
        let mask = match (&self.segmentation, image_dims) {
            (Some(Segmentation::Rle { size, counts }), _) => {
                Some(RleMask::from_runs(size[0], size[1], counts)?)
            }
            (Some(seg @ Segmentation::Polygons(_)), Some((h, w))) => Some(seg.to_mask(h, w)?),
            _ => None,
        };
        Ok(Detection {
            image_id: self.image_id,
            class_id: self.category_id,
            score: self.score,
            bbox,
            mask,
        })
    }

    pub fn from_detection(det: &Detection) -> Self {
        Self {
            image_id: det.image_id,
            category_id: det.class_id,
            score: det.score,
            bbox: det.bbox.to_xywh(),
            segmentation: det.mask.as_ref().map(|m| Segmentation::Rle {
                size: [m.height(), m.width()],
                counts: m.runs().to_vec(),
            }),
        }
    }
}

/// The detections interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    #[serde(rename = "$schema")]
    pub schema: String,
    pub detections: Vec<DetectionRecord>,
}

impl DetectionFile {
    pub fn new(detections: Vec<DetectionRecord>) -> Self {
        Self {
            schema: DETECTIONS_SCHEMA.to_string(),
            detections,
        }
    }

    /// Range checks on every record, collecting all violations.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        for (i, rec) in self.detections.iter().enumerate() {
            if !(0.0..=1.0).contains(&rec.score) {
                issues.push(format!(
                    "detection {i} (image {}) has score {} outside [0, 1]",
                    rec.image_id, rec.score
                ));
            }
            if rec.bbox[2] < 0.0 || rec.bbox[3] < 0.0 {
                issues.push(format!(
                    "detection {i} (image {}) has negative box size",
                    rec.image_id
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Referential check against the ground truth the detections will be
    /// evaluated with: image ids must exist, and RLE masks must match their
    /// image's dimensions.
    pub fn validate_against(&self, gt: &GroundTruthSet) -> Result<()> {
        self.validate()?;
        let dims: HashMap<u64, (u32, u32)> = gt
            .images
            .iter()
            .map(|im| (im.id, (im.height, im.width)))
            .collect();
        let mut issues = Vec::new();
        for (i, rec) in self.detections.iter().enumerate() {
            match dims.get(&rec.image_id) {
                None => issues.push(format!(
                    "detection {i} references image {} absent from the ground truth",
                    rec.image_id
                )),
                Some(&(h, w)) => {
                    if let Some(Segmentation::Rle { size, .. }) = &rec.segmentation {
                        if size[0] != h || size[1] != w {
                            issues.push(format!(
                                "detection {i} mask is {}x{} but image {} is {h}x{w}",
                                size[0], size[1], rec.image_id
                            ));
                        }
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

fn parse_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        detail: err.to_string(),
    }
}

/// Canonical JSON serialization: pretty-printed with a trailing newline.
/// `parse(serialize(x)) == x` and `serialize(parse(f)) == f` for canonical
/// files.
fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse {
            path: "<memory>".into(),
            detail: e.to_string(),
        })?;
    s.push('\n');
    Ok(s)
}

/// Writes via a temp file in the target directory plus an atomic rename, so
/// failures never leave partial output behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    use std::io::Write;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Loads and fully validates a COCO ground-truth file.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruthSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut gt: GroundTruthSet =
        serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    gt.validate_and_normalize()?;
    Ok(gt)
}

pub fn save_ground_truth(gt: &GroundTruthSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_canonical_json(gt)?)
}

/// Loads a detections file: either the canonical `$schema`-tagged object or
/// a bare COCO-results array.
pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    let file = if value.is_array() {
        DetectionFile::new(
            serde_json::from_value(value).map_err(|e| parse_error(path, e))?,
        )
    } else {
        serde_json::from_value(value).map_err(|e| parse_error(path, e))?
    };
    file.validate()?;
    Ok(file)
}

/// Writes the canonical detections format. Scores round-trip at full
/// precision (shortest-representation float formatting).
pub fn save_detections(file: &DetectionFile, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_canonical_json(file)?)
}

/// Deterministic pseudorandom partition of a dataset into parts of the
/// given sizes. Image ids are sorted, shuffled by a seeded generator, and
/// chunked; annotations follow their images. Identical `(seed, input)`
/// always produces identical parts.
pub fn split(gt: &GroundTruthSet, sizes: &[usize], seed: u64) -> Result<Vec<GroundTruthSet>> {
    let total: usize = sizes.iter().sum();
    if total != gt.images.len() {
        return Err(Error::SizeMismatch {
            given: total,
            expected: gt.images.len(),
        });
    }
    let mut ids: Vec<u64> = gt.images.iter().map(|im| im.id).collect();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let by_id: HashMap<u64, &CocoImage> = gt.images.iter().map(|im| (im.id, im)).collect();
    let mut parts = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &size in sizes {
        let chunk: HashSet<u64> = ids[offset..offset + size].iter().copied().collect();
        offset += size;
        let mut images: Vec<CocoImage> = chunk.iter().map(|id| by_id[id].clone()).collect();
        images.sort_by_key(|im| im.id);
        let annotations: Vec<CocoAnnotation> = gt
            .annotations
            .iter()
            .filter(|ann| chunk.contains(&ann.image_id))
            .cloned()
            .collect();
        parts.push(GroundTruthSet {
            images,
            annotations,
            categories: gt.categories.clone(),
        });
    }
    Ok(parts)
}
