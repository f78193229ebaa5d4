//! Acceptance suite: one test per release criterion, each printing a PASS
//! line. Every expected value is either analytically forced or computed by
//! a brute-force oracle that lives in this file.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stenokit::cli::{
    cmd_evaluate, cmd_postprocess, cmd_sweep, cmd_synth, RunConfig,
};
use stenokit::dataset_io::{
    load_detections, load_ground_truth, save_detections, save_ground_truth, split,
    CocoAnnotation, CocoCategory, CocoImage, GroundTruthSet, GtInstance, Segmentation,
};
use stenokit::geometry::{BBox, Polygon, RleMask};
use stenokit::losses::{
    assign_positive, cls_loss, mask_loss, total_loss, Grid, LossGains, RoiSample,
};
use stenokit::metrics::seg_map;
use stenokit::postprocess::{
    nms, run_pipeline_indices_counted, Detection, IouKind, PostProcessConfig,
};
use stenokit::roi_align::{roi_align, FeatureMap};
use stenokit::synth::SynthConfig;

fn int_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.gen_range(0..64) as f64;
    let y = rng.gen_range(0..64) as f64;
    let w = rng.gen_range(0..40) as f64;
    let h = rng.gen_range(0..40) as f64;
    BBox::from_xywh(x, y, w, h).unwrap()
}

/// Criterion 1: box and mask IoU match brute-force pixel-counting oracles
/// exactly (rational counts) on 10,000 box pairs and 1,000 mask pairs,
/// in under 10 seconds.
#[test]
fn criterion_01_geometry_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);

    for case in 0..10_000 {
        let a = int_box(&mut rng);
        let b = int_box(&mut rng);
        // count unit pixels covered by each box over the shared canvas
        let mut inter = 0u64;
        let mut union = 0u64;
        for px in 0..104u32 {
            for py in 0..104u32 {
                let in_a = (px as f64) >= a.x1()
                    && ((px + 1) as f64) <= a.x2()
                    && (py as f64) >= a.y1()
                    && ((py + 1) as f64) <= a.y2();
                let in_b = (px as f64) >= b.x1()
                    && ((px + 1) as f64) <= b.x2()
                    && (py as f64) >= b.y1()
                    && ((py + 1) as f64) <= b.y2();
                inter += (in_a && in_b) as u64;
                union += (in_a || in_b) as u64;
            }
        }
        let expect = if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        };
        let got = a.iou(&b);
        assert_eq!(got, expect, "case {case}: {a:?} vs {b:?}");
    }

    for case in 0..1_000 {
        let h = rng.gen_range(1..=64u32);
        let w = rng.gen_range(1..=64u32);
        let n = (h * w) as usize;
        let bits_a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let bits_b: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let a = RleMask::encode(&bits_a, h, w).unwrap();
        let b = RleMask::encode(&bits_b, h, w).unwrap();
        let mut inter = 0u64;
        let mut union = 0u64;
        for (&x, &y) in bits_a.iter().zip(&bits_b) {
            inter += (x && y) as u64;
            union += (x || y) as u64;
        }
        let expect = if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        };
        assert_eq!(a.iou(&b).unwrap(), expect, "mask case {case}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("[PASS] criterion 1: geometry IoU equals pixel-count oracles exactly ({elapsed:?})");
}

/// Literal restatement of the greedy NMS contract, O(n^2), independent of
/// the library's implementation.
fn reference_nms(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut removed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for &i in &order {
        if removed[i] {
            continue;
        }
        removed[i] = true;
        kept.push(dets[i].clone());
        for &j in &order {
            if !removed[j]
                && dets[j].class_id == dets[i].class_id
                && dets[i].bbox.iou(&dets[j].bbox) > threshold
            {
                removed[j] = true;
            }
        }
    }
    kept
}

/// Criterion 2: NMS equals the O(n^2) greedy reference on 500 randomized
/// instances with up to 200 detections, and survivors are pairwise
/// compatible in every case.
#[test]
fn criterion_02_nms_reference_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for case in 0..500 {
        let n = rng.gen_range(0..=200);
        let dets: Vec<Detection> = (0..n)
            .map(|_| Detection {
                image_id: 1,
                class_id: rng.gen_range(0..3),
                score: rng.gen_range(0..=1000) as f64 / 1000.0,
                bbox: int_box(&mut rng),
                mask: None,
            })
            .collect();
        let threshold = rng.gen_range(1..=100) as f64 / 100.0;
        let ours = nms(&dets, threshold, IouKind::Box);
        let reference = reference_nms(&dets, threshold);
        assert_eq!(ours, reference, "case {case} (n={n}, threshold={threshold})");
        for (i, a) in ours.iter().enumerate() {
            for b in ours.iter().skip(i + 1) {
                if a.class_id == b.class_id {
                    assert!(
                        a.iou(b, IouKind::Box) <= threshold,
                        "case {case}: surviving pair exceeds threshold"
                    );
                }
            }
        }
    }
    println!("[PASS] criterion 2: NMS equals the O(n^2) greedy reference on 500 instances");
}

/// Criterion 3: loss terms match independent summation oracles within
/// 1e-12; the stated boundary values hold; the total is linear in each
/// gain.
#[test]
#[allow(clippy::approx_constant)] // the -ln 0.5 literal is a frozen oracle value
fn criterion_03_loss_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10553);

    // boundary values
    let half = mask_loss(
        &[Grid::new(1, 1, vec![0.5]).unwrap()],
        &[Grid::new(1, 1, vec![true]).unwrap()],
    )
    .unwrap();
    assert!((half - 0.6931471805599453).abs() < 1e-12, "-ln 0.5");
    let perfect = mask_loss(
        &[Grid::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap()],
        &[Grid::new(2, 2, vec![true, false, true, false]).unwrap()],
    )
    .unwrap();
    assert!(perfect <= 1e-10, "perfect prediction");
    assert!((cls_loss(&[0.7, 0.3], 1).unwrap() - 1.2039728043259361).abs() < 1e-12);

    for case in 0..200 {
        // random batch
        let batch: Vec<RoiSample> = (0..rng.gen_range(1..6))
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let class_probs: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                let grid_vals: Vec<f64> = (0..9).map(|_| rng.gen_range(0.01..0.99)).collect();
                let grid_bits: Vec<bool> = (0..9).map(|_| rng.gen_bool(0.5)).collect();
                RoiSample {
                    class_probs,
                    true_class: rng.gen_range(0..4),
                    pred_box: [rng.gen_range(0.0..100.0); 4].map(|v: f64| v + rng.gen::<f64>()),
                    true_box: [rng.gen_range(0.0..100.0); 4].map(|v: f64| v + rng.gen::<f64>()),
                    pred_mask: Grid::new(3, 3, grid_vals).unwrap(),
                    target_mask: Grid::new(3, 3, grid_bits).unwrap(),
                    is_positive: rng.gen_bool(0.7),
                }
            })
            .collect();

        // independent oracles: plain reversed-order summations
        let cls_oracle: f64 = batch
            .iter()
            .rev()
            .map(|s| -s.class_probs[s.true_class].max(1e-12).ln())
            .sum::<f64>()
            / batch.len() as f64;
        let positives: Vec<&RoiSample> = batch.iter().filter(|s| s.is_positive).collect();
        let box_oracle: f64 = if positives.is_empty() {
            0.0
        } else {
            positives
                .iter()
                .rev()
                .map(|s| {
                    (0..4)
                        .rev()
                        .map(|i| (s.pred_box[i] - s.true_box[i]).abs())
                        .sum::<f64>()
                })
                .sum::<f64>()
                / positives.len() as f64
        };
        let mask_oracle: f64 = if positives.is_empty() {
            0.0
        } else {
            positives
                .iter()
                .rev()
                .map(|s| {
                    let mut acc = 0.0;
                    for (p, y) in s.pred_mask.data().iter().zip(s.target_mask.data()) {
                        let p = p.clamp(1e-12, 1.0 - 1e-12);
                        acc -= if *y { p.ln() } else { (1.0 - p).ln() };
                    }
                    acc / s.pred_mask.data().len() as f64
                })
                .sum::<f64>()
                / positives.len() as f64
        };

        let unit = total_loss(&batch, &LossGains::default()).unwrap();
        assert!((unit.cls - cls_oracle).abs() < 1e-12, "case {case} cls");
        assert!((unit.r#box - box_oracle).abs() < 1e-12, "case {case} box");
        assert!((unit.mask - mask_oracle).abs() < 1e-12, "case {case} mask");

        // linearity in each gain coefficient
        for _ in 0..3 {
            let gains = LossGains {
                lambda_cls: rng.gen_range(0.0..4.0),
                lambda_box: rng.gen_range(0.0..4.0),
                lambda_mask: rng.gen_range(0.0..4.0),
            };
            let weighted = total_loss(&batch, &gains).unwrap();
            let expect = gains.lambda_cls * unit.cls
                + gains.lambda_box * unit.r#box
                + gains.lambda_mask * unit.mask;
            assert!(
                (weighted.total - expect).abs() < 1e-12 * (1.0 + expect.abs()),
                "case {case} linearity"
            );
        }
    }
    println!("[PASS] criterion 3: losses match independent oracles within 1e-12");
}

/// Criterion 4: RoI-Align constant preservation, linearity, and translation
/// equivariance within 1e-9 on 200 randomized cases; the 2x2 hand case
/// returns exactly 2.5.
#[test]
fn criterion_04_roi_align_kernel() {
    let fm = FeatureMap::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let out = roi_align(&fm, &BBox::new(0.0, 0.0, 2.0, 2.0).unwrap(), 1, 1, 1).unwrap();
    assert_eq!(out.values(), &[2.5], "hand-computed center sample");

    let mut rng = ChaCha8Rng::seed_from_u64(0x401);
    for case in 0..200 {
        let value = rng.gen_range(-5.0..5.0);
        let roi = BBox::from_xywh(
            rng.gen_range(3.0..6.0),
            rng.gen_range(3.0..6.0),
            rng.gen_range(1.0..5.0),
            rng.gen_range(1.0..5.0),
        )
        .unwrap();
        let out_h = rng.gen_range(1..5);
        let out_w = rng.gen_range(1..5);
        let sr = rng.gen_range(1..4);

        // constant preservation on an interior RoI
        let constant = FeatureMap::constant(1, 16, 16, value);
        let pooled = roi_align(&constant, &roi, out_h, out_w, sr).unwrap();
        for &v in pooled.values() {
            assert!((v - value).abs() <= 1e-9, "case {case} constant");
        }

        // linearity
        let seed_a: u64 = rng.gen();
        let seed_b: u64 = rng.gen();
        let pattern = |seed: u64, y: usize, x: usize| -> f64 {
            ((y as u64 * 131 + x as u64 * 29 + seed) % 43) as f64 / 6.0 - 3.0
        };
        let alpha = rng.gen_range(-2.0..2.0);
        let beta = rng.gen_range(-2.0..2.0);
        let a = FeatureMap::from_fn(1, 16, 16, |_, y, x| pattern(seed_a, y, x));
        let b = FeatureMap::from_fn(1, 16, 16, |_, y, x| pattern(seed_b, y, x));
        let combo = FeatureMap::new(
            1,
            16,
            16,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(&u, &v)| alpha * u + beta * v)
                .collect(),
        )
        .unwrap();
        let oa = roi_align(&a, &roi, out_h, out_w, sr).unwrap();
        let ob = roi_align(&b, &roi, out_h, out_w, sr).unwrap();
        let oc = roi_align(&combo, &roi, out_h, out_w, sr).unwrap();
        for i in 0..oc.values().len() {
            let expect = alpha * oa.values()[i] + beta * ob.values()[i];
            assert!((oc.values()[i] - expect).abs() <= 1e-9, "case {case} linearity");
        }

        // translation equivariance by an integer offset, away from borders
        let dx = rng.gen_range(0..4usize);
        let dy = rng.gen_range(0..4usize);
        let shifted = FeatureMap::from_fn(1, 16, 16, |_, y, x| {
            let sy = y as i64 - dy as i64;
            let sx = x as i64 - dx as i64;
            pattern(seed_a, sy.rem_euclid(16) as usize, sx.rem_euclid(16) as usize)
        });
        // restrict to an interior window where no wrapped value is read
        let roi_small = BBox::from_xywh(4.5, 4.5, 3.0, 3.0).unwrap();
        let base = roi_align(&a, &roi_small, out_h, out_w, sr).unwrap();
        let moved = roi_align(
            &shifted,
            &roi_small.translate(dx as f64, dy as f64),
            out_h,
            out_w,
            sr,
        )
        .unwrap();
        for (u, v) in base.values().iter().zip(moved.values()) {
            assert!((u - v).abs() <= 1e-9, "case {case} translation");
        }
    }
    println!("[PASS] criterion 4: RoI-Align kernel properties hold within 1e-9; 2x2 case is 2.5");
}

/// Criterion 5: the positive-RoI rule is boundary inclusive at IoU exactly
/// 0.5.
#[test]
fn criterion_05_positive_roi_boundary() {
    let roi = BBox::new(0.0, 0.0, 2.0, 1.0).unwrap();
    let gt = BBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
    assert_eq!(roi.iou(&gt), 0.5, "fixture IoU must be exactly 0.5");
    assert_eq!(assign_positive(&roi, &[gt]), Some(0));

    // just below the boundary is negative
    let almost = BBox::new(0.0, 0.0, 2.0, 0.999).unwrap();
    assert!(almost.iou(&gt) < 0.5);
    assert_eq!(assign_positive(&almost, &[gt]), None);
    println!("[PASS] criterion 5: IoU exactly 0.5 assigns positive (boundary inclusive)");
}

/// Criterion 6: synth -> postprocess -> evaluate reproduces the planted
/// tp/fp/fn counts exactly across 20 seeds, in under 60 seconds.
#[test]
fn criterion_06_end_to_end_known_answer_loop() {
    let start = Instant::now();
    let base_a = SynthConfig {
        num_images: 6,
        instances_per_image: (1, 1),
        jitter: 1.0,
        tp_score_range: (0.86, 0.99),
        dup_score_range: (0.8, 0.85),
        duplicate_rate: 0.5,
        dropout_rate: 0.15,
        ..SynthConfig::default()
    };
    let base_b = SynthConfig {
        num_images: 6,
        instances_per_image: (1, 3),
        jitter: 0.75,
        tp_score_range: (0.85, 1.0),
        duplicate_rate: 0.0,
        dropout_rate: 0.1,
        ..SynthConfig::default()
    };

    for (variant, base) in [(0u64, base_a), (1u64, base_b)] {
        for seed in 0..10u64 {
            let dir = tempfile::tempdir().unwrap();
            let out_dir = dir.path().join("fixture");
            let mut cfg = RunConfig {
                out: Some(out_dir.clone()),
                ..RunConfig::default()
            };
            cfg.synth = SynthConfig {
                seed: seed * 7 + variant,
                ..base.clone()
            };
            let manifest = cmd_synth(&cfg).unwrap();

            let processed = dir.path().join("processed.json");
            let pp_cfg = RunConfig {
                gt: Some(out_dir.join("gt.json")),
                dt: Some(out_dir.join("detections.json")),
                out: Some(processed.clone()),
                ..RunConfig::default()
            };
            cmd_postprocess(&pp_cfg).unwrap();

            let eval_cfg = RunConfig {
                gt: Some(out_dir.join("gt.json")),
                dt: Some(processed),
                out: None,
                ..RunConfig::default()
            };
            let report = cmd_evaluate(&eval_cfg).unwrap();
            assert_eq!(
                (
                    report.true_positives,
                    report.false_positives,
                    report.false_negatives
                ),
                (
                    manifest.planted.true_positives,
                    manifest.planted.false_positives,
                    manifest.planted.false_negatives
                ),
                "seed {seed} variant {variant}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("[PASS] criterion 6: planted tp/fp/fn reproduced exactly across 20 seeds ({elapsed:?})");
}

/// Criterion 7: the no-flag configuration is exactly NMS 0.95 / confidence
/// 0.8 / top-3, shown both by introspection and by a fixture where every
/// stage changes the outcome.
#[test]
fn criterion_07_default_configuration() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.postprocess.nms_iou, 0.95);
    assert_eq!(cfg.postprocess.score_threshold, 0.8);
    assert_eq!(cfg.postprocess.max_detections, 3);
    assert_eq!(cfg.postprocess.rpn_nms_iou, 0.7);
    assert_eq!(cfg.matching.iou_threshold, 0.5);
    assert_eq!(PostProcessConfig::default(), cfg.postprocess);

    let mk = |score: f64, x: f64| Detection {
        image_id: 1,
        class_id: 1,
        score,
        bbox: BBox::from_xywh(x, 10.0, 40.0, 40.0).unwrap(),
        mask: None,
    };
    let dets = vec![
        mk(0.99, 10.0),
        mk(0.98, 10.5), // IoU 39.5/40.5 > 0.95 with the first: NMS removes it
        mk(0.90, 100.0),
        mk(0.85, 200.0),
        mk(0.82, 300.0),
        mk(0.79, 400.0), // below the confidence threshold
    ];
    assert!(dets[0].iou(&dets[1], IouKind::Box) > 0.95);
    let (kept, counts) = run_pipeline_indices_counted(&dets, &cfg.postprocess, IouKind::Box);
    assert_eq!(counts.input, 6);
    assert_eq!(counts.after_confidence, 5, "confidence stage removed one");
    assert_eq!(counts.after_nms, 4, "NMS stage removed one");
    assert_eq!(counts.after_cap, 3, "cap stage removed one");
    assert_eq!(kept, vec![0, 2, 3]);
    println!("[PASS] criterion 7: defaults are 0.95 / 0.8 / 3 and each stage changes the fixture");
}

/// Overlapping-pair fixture: two true instances at box IoU 0.9 per image,
/// each with a perfect detection. Tight NMS merges true positives away;
/// loose NMS keeps them.
fn overlapping_truth_fixture(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let side = 30.0;
    let shift = side / 19.0; // box IoU (w-d)/(w+d) = 0.9
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut records = Vec::new();
    let mut ann_id = 1u64;
    for image_id in 1..=4u64 {
        images.push(CocoImage {
            id: image_id,
            width: 64,
            height: 64,
            file_name: format!("img{image_id}.png"),
        });
        for (k, score) in [(0u64, 0.9), (1u64, 0.85)] {
            let x = 10.0 + k as f64 * shift;
            let poly = Polygon::new(vec![
                (x, 10.0),
                (x + side, 10.0),
                (x + side, 10.0 + side),
                (x, 10.0 + side),
            ])
            .unwrap();
            let mask = poly.to_mask(64, 64).unwrap();
            annotations.push(CocoAnnotation {
                id: ann_id,
                image_id,
                category_id: 1,
                segmentation: Segmentation::Polygons(vec![poly.to_flat()]),
                bbox: poly.bounds().to_xywh(),
                area: mask.area() as f64,
                iscrowd: 0,
            });
            ann_id += 1;
            records.push(stenokit::dataset_io::DetectionRecord {
                image_id,
                category_id: 1,
                score,
                bbox: poly.bounds().to_xywh(),
                segmentation: Some(Segmentation::Polygons(vec![poly.to_flat()])),
            });
        }
    }
    let mut gt = GroundTruthSet {
        images,
        annotations,
        categories: vec![CocoCategory {
            id: 1,
            name: "stenosis".into(),
            supercategory: None,
        }],
    };
    gt.validate_and_normalize().unwrap();
    let gt_path = dir.join("gt.json");
    let dt_path = dir.join("dt.json");
    save_ground_truth(&gt, &gt_path).unwrap();
    save_detections(&stenokit::dataset_io::DetectionFile::new(records), &dt_path).unwrap();
    (gt_path, dt_path)
}

/// Criterion 8: the sweep emits 10 deterministic rows over the default
/// grid, and on the overlapping-truth fixture F1 at NMS 0.95 strictly
/// exceeds F1 at 0.5.
#[test]
fn criterion_08_sweep_harness() {
    let dir = tempfile::tempdir().unwrap();
    let (gt_path, dt_path) = overlapping_truth_fixture(dir.path());
    let out_csv = dir.path().join("sweep.csv");
    let cfg = RunConfig {
        gt: Some(gt_path),
        dt: Some(dt_path),
        out: Some(out_csv.clone()),
        ..RunConfig::default()
    };
    let rows = cmd_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 10, "default grid has ten points");
    let bytes_first = std::fs::read(&out_csv).unwrap();
    let rows_again = cmd_sweep(&cfg).unwrap();
    assert_eq!(rows, rows_again, "sweep rows are deterministic");
    assert_eq!(bytes_first, std::fs::read(&out_csv).unwrap(), "CSV bytes stable");

    let f1_at = |t: f64| rows.iter().find(|r| (r.nms_iou - t).abs() < 1e-9).unwrap().f1;
    assert!(
        f1_at(0.95) > f1_at(0.5),
        "overlapping true detections: F1@0.95 = {} must exceed F1@0.5 = {}",
        f1_at(0.95),
        f1_at(0.5)
    );
    assert_eq!(f1_at(0.95), 1.0);
    println!(
        "[PASS] criterion 8: 10 deterministic sweep rows; F1@0.95 = {} > F1@0.5 = {}",
        f1_at(0.95),
        f1_at(0.5)
    );
}

/// Criterion 9: seg-mAP equals the hand-computed fixture value, and the
/// perfect / empty detection sets score 1.0 / 0.0.
#[test]
fn criterion_09_seg_map_fixture() {
    let square = |image_id: u64, score: f64, x: f64, y: f64| -> Detection {
        let poly =
            Polygon::new(vec![(x, y), (x + 10.0, y), (x + 10.0, y + 10.0), (x, y + 10.0)])
                .unwrap();
        Detection {
            image_id,
            class_id: 1,
            score,
            bbox: BBox::new(x, y, x + 10.0, y + 10.0).unwrap(),
            mask: Some(poly.to_mask(64, 64).unwrap()),
        }
    };
    let as_gt = |d: &Detection| GtInstance {
        image_id: d.image_id,
        class_id: d.class_id,
        bbox: d.bbox,
        mask: d.mask.clone(),
    };

    // three instances; four detections: hit 0.9, miss 0.8, hit 0.7, miss 0.6.
    // Hand computation: hits in score order = [1, 0, 1, 0], npos = 3;
    // precision envelope (1, 2/3, 2/3, 1/2); recall reaches 1/3 then 2/3;
    // 101-point AP = (34*1 + 33*(2/3) + 34*0) / 101 = 56/101 at every
    // threshold, so the mean over thresholds is 56/101.
    let g0 = square(1, 1.0, 0.0, 0.0);
    let g1 = square(1, 1.0, 30.0, 30.0);
    let g2 = square(2, 1.0, 8.0, 8.0);
    let gts = vec![as_gt(&g0), as_gt(&g1), as_gt(&g2)];
    let dets = vec![
        Detection { score: 0.9, ..g0.clone() },
        square(1, 0.8, 50.0, 50.0),
        Detection { score: 0.7, ..g1.clone() },
        square(2, 0.6, 40.0, 2.0),
    ];
    let got = seg_map(&dets, &gts).unwrap();
    assert!(
        (got - 56.0 / 101.0).abs() < 1e-9,
        "hand-computed fixture: got {got}, want {}",
        56.0 / 101.0
    );

    let perfect = vec![
        Detection { score: 0.95, ..g0.clone() },
        Detection { score: 0.9, ..g1.clone() },
        Detection { score: 0.85, ..g2.clone() },
    ];
    assert_eq!(seg_map(&perfect, &gts).unwrap(), 1.0);
    assert_eq!(seg_map(&[], &gts).unwrap(), 0.0);
    println!("[PASS] criterion 9: seg-mAP fixture equals 56/101; perfect = 1.0, empty = 0.0");
}

fn grid_ground_truth(num_images: usize) -> GroundTruthSet {
    let images: Vec<CocoImage> = (1..=num_images as u64)
        .map(|id| CocoImage {
            id,
            width: 512,
            height: 512,
            file_name: format!("img{id:06}.png"),
        })
        .collect();
    let annotations: Vec<CocoAnnotation> = (1..=num_images as u64)
        .map(|id| {
            let x = 100.0 + (id % 7) as f64;
            let poly = vec![x, 100.0, x + 40.0, 100.0, x + 40.0, 140.0, x, 140.0];
            CocoAnnotation {
                id,
                image_id: id,
                category_id: 1,
                segmentation: Segmentation::Polygons(vec![poly]),
                bbox: [x, 100.0, 40.0, 40.0],
                area: 1600.0,
                iscrowd: 0,
            }
        })
        .collect();
    let mut gt = GroundTruthSet {
        images,
        annotations,
        categories: vec![CocoCategory {
            id: 1,
            name: "stenosis".into(),
            supercategory: None,
        }],
    };
    gt.validate_and_normalize().unwrap();
    gt
}

/// Criterion 10: canonical files survive parse -> serialize -> parse
/// byte-identically, and the [1190, 10] / [800, 200] splits are disjoint,
/// exhaustive, and seed-deterministic.
#[test]
fn criterion_10_format_fixpoints_and_splits() {
    let dir = tempfile::tempdir().unwrap();

    // fixpoint on a noisy synthetic fixture
    let out = stenokit::synth::generate(&SynthConfig {
        seed: 77,
        num_images: 6,
        jitter: 1.5,
        duplicate_rate: 0.4,
        dropout_rate: 0.2,
        tp_score_range: (0.82, 0.99),
        ..SynthConfig::default()
    })
    .unwrap();
    let gt_path = dir.path().join("gt.json");
    let dt_path = dir.path().join("dt.json");
    save_ground_truth(&out.ground_truth, &gt_path).unwrap();
    save_detections(&out.detections, &dt_path).unwrap();
    let gt_bytes = std::fs::read(&gt_path).unwrap();
    let dt_bytes = std::fs::read(&dt_path).unwrap();
    let gt_loaded = load_ground_truth(&gt_path).unwrap();
    let dt_loaded = load_detections(&dt_path).unwrap();
    assert_eq!(gt_loaded, out.ground_truth, "parse inverts serialize");
    assert_eq!(dt_loaded, out.detections);
    save_ground_truth(&gt_loaded, &gt_path).unwrap();
    save_detections(&dt_loaded, &dt_path).unwrap();
    assert_eq!(gt_bytes, std::fs::read(&gt_path).unwrap(), "gt bytes stable");
    assert_eq!(dt_bytes, std::fs::read(&dt_path).unwrap(), "dt bytes stable");

    // splits
    for (total, sizes) in [(1200usize, [1190usize, 10]), (1000, [800, 200])] {
        let gt = grid_ground_truth(total);
        let a = split(&gt, &sizes, 2024).unwrap();
        let b = split(&gt, &sizes, 2024).unwrap();
        assert_eq!(a, b, "identical seed gives identical partitions");
        assert_eq!(a[0].images.len(), sizes[0]);
        assert_eq!(a[1].images.len(), sizes[1]);
        let ids0: std::collections::HashSet<u64> =
            a[0].images.iter().map(|im| im.id).collect();
        let ids1: std::collections::HashSet<u64> =
            a[1].images.iter().map(|im| im.id).collect();
        assert!(ids0.is_disjoint(&ids1), "parts are disjoint");
        assert_eq!(ids0.len() + ids1.len(), total, "parts are exhaustive");
        for part in &a {
            let ids: std::collections::HashSet<u64> =
                part.images.iter().map(|im| im.id).collect();
            assert!(part.annotations.iter().all(|an| ids.contains(&an.image_id)));
        }
        let c = split(&gt, &sizes, 2025).unwrap();
        assert_ne!(a, c, "different seed gives a different partition");
    }
    println!("[PASS] criterion 10: format fixpoints hold; splits are disjoint, exhaustive, deterministic");
}
