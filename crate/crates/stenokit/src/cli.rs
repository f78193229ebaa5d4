//! Batch commands behind the `stenokit` binary: `postprocess`, `evaluate`,
//! `sweep`, `synth`, and `loss-check`.
//!
//! Every command is deterministic and idempotent for identical inputs and
//! config, and output files are written atomically (temp file plus rename)
//! so failures never leave partial results for CI to trip over. Image-level
//! work runs on a worker pool of configurable size; results merge in
//! image-id order, so parallelism never changes output bytes.
//!
//! With no flags the defaults reproduce the tuned inference configuration:
//! NMS IoU 0.95, confidence 0.8, at most 3 detections, mask-IoU matching at
//! 0.5.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{
    load_detections, load_ground_truth, save_detections, save_ground_truth, write_atomic,
    DetectionFile, DetectionRecord, GroundTruthSet, GtInstance, Segmentation,
};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBreakdown, LossGains, RoiSample};
use crate::metrics::{
    f1_score, match_detections, seg_map, threshold_sweep, EvalReport, MatchConfig, SweepRow,
};
use crate::postprocess::{
    run_pipeline_indices_counted, Detection, IouKind, PostProcessConfig, StageCounts,
};
use crate::synth::{generate, PlantedCounts, SynthConfig};

/// Version tag written into synth manifests.
pub const MANIFEST_SCHEMA: &str = "stenokit/synth-manifest/v1";

/// Resolved settings for one command invocation: defaults, overlaid by the
/// config file, overlaid by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub gt: Option<PathBuf>,
    pub dt: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub postprocess: PostProcessConfig,
    pub matching: MatchConfig,
    /// Overlap measure used by pipeline NMS (matching has its own knob).
    pub nms_kind: IouKind,
    /// Fail `evaluate` unless seg-mAP can be computed.
    pub require_seg_map: bool,
    /// NMS thresholds visited by `sweep`.
    pub sweep_grid: Vec<f64>,
    /// Worker threads for per-image work; 0 means one per core.
    pub threads: usize,
    pub log_level: String,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gt: None,
            dt: None,
            out: None,
            postprocess: PostProcessConfig::default(),
            matching: MatchConfig::default(),
            nms_kind: IouKind::Box,
            require_seg_map: false,
            sweep_grid: crate::metrics::coco_iou_thresholds(),
            threads: 0,
            log_level: "info".into(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Range checks on every threshold, collecting all violations.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if !(self.postprocess.nms_iou > 0.0 && self.postprocess.nms_iou <= 1.0) {
            issues.push(format!(
                "nms_iou {} must lie in (0, 1]",
                self.postprocess.nms_iou
            ));
        }
        if !(self.postprocess.rpn_nms_iou > 0.0 && self.postprocess.rpn_nms_iou <= 1.0) {
            issues.push(format!(
                "rpn_nms_iou {} must lie in (0, 1]",
                self.postprocess.rpn_nms_iou
            ));
        }
        if !(0.0..=1.0).contains(&self.postprocess.score_threshold) {
            issues.push(format!(
                "score_threshold {} must lie in [0, 1]",
                self.postprocess.score_threshold
            ));
        }
        if !(self.matching.iou_threshold > 0.0 && self.matching.iou_threshold <= 1.0) {
            issues.push(format!(
                "match iou_threshold {} must lie in (0, 1]",
                self.matching.iou_threshold
            ));
        }
        if self.sweep_grid.is_empty() {
            issues.push("sweep_grid must not be empty".into());
        }
        for &t in &self.sweep_grid {
            if !(t > 0.0 && t <= 1.0) {
                issues.push(format!("sweep threshold {t} must lie in (0, 1]"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Loads a TOML (`.toml`) or JSON (`.json`) config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let parse_detail = |e: String| Error::Parse {
            path: path.display().to_string(),
            detail: e,
        };
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| parse_detail(e.to_string())),
            Some("toml") | None => {
                toml::from_str(&text).map_err(|e| parse_detail(e.to_string()))
            }
            Some(other) => Err(Error::InvalidConfig(format!(
                "unsupported config extension .{other} (use .toml or .json)"
            ))),
        }
    }
}

fn required<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    opt.as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("{flag} is required for this command")))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("worker pool")
            .install(f)
    }
}

/// Converts records to pipeline detections. Polygon segmentations
/// rasterize only when `rasterize` is set (mask-IoU work); that needs the
/// image dimensions from the ground truth.
fn detections_from_records(
    records: &[DetectionRecord],
    dims: Option<&HashMap<u64, (u32, u32)>>,
    rasterize: bool,
) -> Result<Vec<Detection>> {
    records
        .iter()
        .map(|rec| {
            let image_dims = if rasterize {
                match dims.and_then(|m| m.get(&rec.image_id)) {
                    Some(&d) => Some(d),
                    None if matches!(rec.segmentation, Some(Segmentation::Polygons(_))) => {
                        return Err(Error::InvalidConfig(format!(
                            "mask-IoU work on polygon segmentations needs --gt for image \
                             dimensions (image {})",
                            rec.image_id
                        )));
                    }
                    None => None,
                }
            } else {
                None
            };
            rec.to_detection(image_dims)
        })
        .collect()
}

fn image_dims(gt: &GroundTruthSet) -> HashMap<u64, (u32, u32)> {
    gt.images
        .iter()
        .map(|im| (im.id, (im.height, im.width)))
        .collect()
}

fn require_masks(dets: &[Detection]) -> Result<()> {
    for d in dets {
        if d.mask.is_none() {
            return Err(Error::MissingMask {
                image_id: d.image_id,
            });
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Applies the post-processing pipeline per image and writes the surviving
/// records (original payloads preserved) to `--out`. Prints per-stage
/// survivor counts.
pub fn cmd_postprocess(cfg: &RunConfig) -> Result<StageCounts> {
    cfg.validate()?;
    let dt_path = required(&cfg.dt, "--dt")?;
    let out_path = required(&cfg.out, "--out")?;
    let file = load_detections(dt_path)?;

    let gt = cfg.gt.as_ref().map(load_ground_truth).transpose()?;
    if let Some(gt) = &gt {
        file.validate_against(gt)?;
    }
    let dims = gt.as_ref().map(image_dims);
    let rasterize = cfg.nms_kind == IouKind::Mask;
    let dets = detections_from_records(&file.detections, dims.as_ref(), rasterize)?;
    log::info!(
        "post-processing {} detections across {} image(s)",
        dets.len(),
        dets.iter().map(|d| d.image_id).collect::<std::collections::HashSet<_>>().len()
    );

    // group record indices per image, process images on the pool, merge in
    // image-id order
    let mut by_image: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = by_image.into_values().collect();
    let pp = cfg.postprocess;
    let kind = cfg.nms_kind;
    let per_image: Vec<(Vec<usize>, StageCounts)> = in_pool(cfg.threads, || {
        groups
            .par_iter()
            .map(|indices| {
                let subset: Vec<Detection> = indices.iter().map(|&i| dets[i].clone()).collect();
                let (kept, counts) = run_pipeline_indices_counted(&subset, &pp, kind);
                (kept.iter().map(|&k| indices[k]).collect(), counts)
            })
            .collect()
    });

    let mut counts = StageCounts {
        input: dets.len(),
        after_confidence: 0,
        after_nms: 0,
        after_cap: 0,
    };
    let mut survivors: Vec<usize> = Vec::new();
    for (kept, c) in per_image {
        counts.after_confidence += c.after_confidence;
        counts.after_nms += c.after_nms;
        counts.after_cap += c.after_cap;
        survivors.extend(kept);
    }

    let records: Vec<DetectionRecord> = survivors
        .iter()
        .map(|&i| file.detections[i].clone())
        .collect();
    save_detections(&DetectionFile::new(records), out_path)?;

    println!("input detections      {}", counts.input);
    println!("after confidence      {}", counts.after_confidence);
    println!("after nms             {}", counts.after_nms);
    println!("after cap             {}", counts.after_cap);
    println!("wrote {}", out_path.display());
    Ok(counts)
}

/// Matches detections against ground truth and reports precision, recall,
/// and F1 (plus seg-mAP when masks are available or required). Writes the
/// JSON report to `--out` when given; always prints the table.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let gt_path = required(&cfg.gt, "--gt")?;
    let dt_path = required(&cfg.dt, "--dt")?;
    let gt = load_ground_truth(gt_path)?;
    let file = load_detections(dt_path)?;
    file.validate_against(&gt)?;

    let all_have_segmentation = !file.detections.is_empty()
        && file.detections.iter().all(|r| r.segmentation.is_some());
    let want_seg_map = cfg.require_seg_map || all_have_segmentation;
    let need_masks = cfg.matching.iou_kind == IouKind::Mask || want_seg_map;

    let dims = image_dims(&gt);
    let dets = in_pool(cfg.threads, || {
        detections_from_records(&file.detections, Some(&dims), need_masks)
    })?;
    if cfg.matching.iou_kind == IouKind::Mask || cfg.require_seg_map {
        require_masks(&dets)?;
    }
    let gts = in_pool(cfg.threads, || gt.instances(need_masks))?;
    log::info!(
        "evaluating {} detections against {} instances over {} image(s)",
        dets.len(),
        gts.len(),
        gt.images.len()
    );

    let matched = match_detections(&dets, &gts, cfg.matching.iou_threshold, cfg.matching.iou_kind);
    let mut report = f1_score(&matched);
    if want_seg_map {
        report.seg_map = Some(seg_map(&dets, &gts)?);
    }

    if let Some(out_path) = &cfg.out {
        write_json(&report, out_path)?;
        println!("wrote {}", out_path.display());
    }
    print!("{}", report.to_table());
    Ok(report)
}

/// Sweeps the pipeline NMS threshold over the grid and writes one CSV row
/// per grid point. Expects raw (pre-NMS) detections as input.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let gt_path = required(&cfg.gt, "--gt")?;
    let dt_path = required(&cfg.dt, "--dt")?;
    let out_path = required(&cfg.out, "--out")?;
    let gt = load_ground_truth(gt_path)?;
    let file = load_detections(dt_path)?;
    file.validate_against(&gt)?;

    let need_masks = cfg.matching.iou_kind == IouKind::Mask || cfg.nms_kind == IouKind::Mask;
    let dims = image_dims(&gt);
    let dets = detections_from_records(&file.detections, Some(&dims), need_masks)?;
    if cfg.matching.iou_kind == IouKind::Mask {
        require_masks(&dets)?;
    }
    let gts = gt.instances(need_masks)?;

    let base = cfg.postprocess;
    let matching = cfg.matching;
    let kind = cfg.nms_kind;
    let grid = cfg.sweep_grid.clone();
    let rows: Vec<SweepRow> = in_pool(cfg.threads, || {
        grid.par_iter()
            .map(|&t| threshold_sweep(&dets, &gts, &base, kind, &matching, &[t])[0])
            .collect()
    });

    let mut csv = String::from("nms_iou,f1\n");
    for row in &rows {
        csv.push_str(&format!("{:.2},{}\n", row.nms_iou, row.f1));
    }
    write_atomic(out_path, &csv)?;
    println!("wrote {} ({} rows)", out_path.display(), rows.len());
    for row in &rows {
        println!("nms_iou={:.2} f1={:.4}", row.nms_iou, row.f1);
    }
    Ok(rows)
}

/// Manifest describing a generated fixture pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    #[serde(rename = "$schema")]
    pub schema: String,
    pub config: SynthConfig,
    pub planted: PlantedCounts,
    pub num_images: usize,
    pub num_annotations: usize,
    pub num_detections: usize,
}

/// Generates a fixture pair into the output directory: `gt.json`,
/// `detections.json`, and `manifest.json` with the seed and planted counts.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthManifest> {
    let out_dir = required(&cfg.out, "--out")?;
    let out = generate(&cfg.synth)?;
    std::fs::create_dir_all(out_dir)?;
    save_ground_truth(&out.ground_truth, out_dir.join("gt.json"))?;
    save_detections(&out.detections, out_dir.join("detections.json"))?;
    let manifest = SynthManifest {
        schema: MANIFEST_SCHEMA.to_string(),
        config: cfg.synth.clone(),
        planted: out.planted,
        num_images: out.ground_truth.images.len(),
        num_annotations: out.ground_truth.annotations.len(),
        num_detections: out.detections.detections.len(),
    };
    write_json(&manifest, &out_dir.join("manifest.json"))?;
    println!(
        "wrote {} (seed {}, {} images, planted tp={} fp={} fn={})",
        out_dir.display(),
        cfg.synth.seed,
        manifest.num_images,
        manifest.planted.true_positives,
        manifest.planted.false_positives,
        manifest.planted.false_negatives
    );
    Ok(manifest)
}

/// Input format of `loss-check`: loss gains plus a batch of RoI samples.
#[derive(Debug, Clone, Deserialize)]
pub struct LossCheckFile {
    #[serde(default)]
    pub gains: LossGains,
    pub samples: Vec<RoiSample>,
}

/// Debugging command: evaluates the multi-task loss on a serialized RoI
/// batch and prints the per-term breakdown.
pub fn cmd_loss_check(input: &Path) -> Result<LossBreakdown> {
    let text = std::fs::read_to_string(input)?;
    let file: LossCheckFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: input.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut issues = Vec::new();
    for (i, sample) in file.samples.iter().enumerate() {
        if let Err(Error::Validation(sample_issues)) = sample.validate() {
            issues.extend(sample_issues.into_iter().map(|s| format!("sample {i}: {s}")));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    let breakdown = total_loss(&file.samples, &file.gains)?;
    println!("cls   {:.6}", breakdown.cls);
    println!("box   {:.6}", breakdown.r#box);
    println!("mask  {:.6}", breakdown.mask);
    println!("total {:.6}", breakdown.total);
    Ok(breakdown)
}

/// One instance of the evaluation-side ground truth paired with detections,
/// loaded the way `evaluate` does — exposed for integration tests and
/// examples that want the exact CLI data path.
pub fn load_eval_inputs(
    gt_path: &Path,
    dt_path: &Path,
    rasterize: bool,
) -> Result<(Vec<Detection>, Vec<GtInstance>)> {
    let gt = load_ground_truth(gt_path)?;
    let file = load_detections(dt_path)?;
    file.validate_against(&gt)?;
    let dims = image_dims(&gt);
    let dets = detections_from_records(&file.detections, Some(&dims), rasterize)?;
    let gts = gt.instances(rasterize)?;
    Ok((dets, gts))
}
