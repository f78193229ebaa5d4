//! End-to-end checks of the `stenokit` binary and the command layer:
//! exit-code contract, determinism of outputs, and the documented behavior
//! of each subcommand.

use std::path::Path;
use std::process::Command;

use stenokit::cli::{cmd_evaluate, cmd_postprocess, cmd_sweep, cmd_synth, RunConfig, SynthManifest};
use stenokit::synth::SynthConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stenokit"))
}

fn synth_fixture(dir: &Path, cfg: SynthConfig) -> SynthManifest {
    let run = RunConfig {
        out: Some(dir.to_path_buf()),
        synth: cfg,
        ..RunConfig::default()
    };
    cmd_synth(&run).unwrap()
}

#[test]
fn postprocess_is_transparent_on_zero_noise_fixture() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path(), SynthConfig { seed: 2, num_images: 3, ..SynthConfig::default() });
    let out = dir.path().join("processed.json");
    let cfg = RunConfig {
        dt: Some(dir.path().join("detections.json")),
        out: Some(out.clone()),
        ..RunConfig::default()
    };
    let counts = cmd_postprocess(&cfg).unwrap();
    // all scores are 1.0 and instances are disjoint: nothing is removed
    assert_eq!(counts.input, counts.after_cap);
    let processed = stenokit::dataset_io::load_detections(&out).unwrap();
    let original = stenokit::dataset_io::load_detections(dir.path().join("detections.json")).unwrap();
    assert_eq!(processed.detections.len(), original.detections.len());
}

#[test]
fn postprocess_caps_duplicate_floods_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    // one true instance plus nine low-overlap duplicates in one image
    let records: Vec<stenokit::dataset_io::DetectionRecord> = (0..10)
        .map(|i| stenokit::dataset_io::DetectionRecord {
            image_id: 1,
            category_id: 1,
            score: if i == 0 { 0.99 } else { 0.81 + 0.001 * i as f64 },
            bbox: [10.0 + 0.2 * i as f64, 10.0, 40.0, 40.0],
            segmentation: None,
        })
        .collect();
    let dt = dir.path().join("dt.json");
    stenokit::dataset_io::save_detections(
        &stenokit::dataset_io::DetectionFile::new(records),
        &dt,
    )
    .unwrap();

    let out = dir.path().join("processed.json");
    let cfg = RunConfig {
        dt: Some(dt),
        out: Some(out.clone()),
        ..RunConfig::default()
    };
    cmd_postprocess(&cfg).unwrap();
    let first = std::fs::read(&out).unwrap();
    let processed = stenokit::dataset_io::load_detections(&out).unwrap();
    assert!(processed.detections.len() <= 3, "per-image cap");

    cmd_postprocess(&cfg).unwrap();
    assert_eq!(first, std::fs::read(&out).unwrap(), "re-run is byte-identical");
}

#[test]
fn evaluate_reports_perfect_fixture_in_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path(), SynthConfig { seed: 4, num_images: 3, ..SynthConfig::default() });
    let report_path = dir.path().join("report.json");
    let cfg = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(dir.path().join("detections.json")),
        out: Some(report_path.clone()),
        ..RunConfig::default()
    };
    let report = cmd_evaluate(&cfg).unwrap();
    assert_eq!(report.f1, 1.0);
    assert_eq!(report.seg_map, Some(1.0), "masks present: seg-mAP computed");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(json["f1"], 1.0);
    assert_eq!(json["seg_map"], 1.0);
    assert!(report.to_table().contains("f1"));
}

#[test]
fn evaluate_with_planted_corruption_reports_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_fixture(
        dir.path(),
        SynthConfig {
            seed: 9,
            num_images: 5,
            instances_per_image: (1, 2),
            jitter: 1.0,
            tp_score_range: (0.9, 1.0),
            duplicate_rate: 0.4,
            dropout_rate: 0.2,
            ..SynthConfig::default()
        },
    );
    let cfg = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(dir.path().join("detections.json")),
        ..RunConfig::default()
    };
    let report = cmd_evaluate(&cfg).unwrap();
    assert_eq!(report.true_positives, manifest.planted.true_positives);
    assert_eq!(report.false_positives, manifest.planted.false_positives);
    assert_eq!(report.false_negatives, manifest.planted.false_negatives);
}

#[test]
fn evaluate_requiring_seg_map_without_masks_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path(), SynthConfig { seed: 6, num_images: 2, ..SynthConfig::default() });
    // strip segmentations
    let mut file =
        stenokit::dataset_io::load_detections(dir.path().join("detections.json")).unwrap();
    for rec in &mut file.detections {
        rec.segmentation = None;
    }
    let dt = dir.path().join("no_masks.json");
    stenokit::dataset_io::save_detections(&file, &dt).unwrap();

    let status = bin()
        .args(["evaluate", "--seg-map", "--iou-kind", "box"])
        .arg("--gt")
        .arg(dir.path().join("gt.json"))
        .arg("--dt")
        .arg(&dt)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert_eq!(status.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("missing mask"), "stderr: {stderr}");
}

#[test]
fn sweep_single_point_matches_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(
        dir.path(),
        SynthConfig {
            seed: 12,
            num_images: 4,
            instances_per_image: (1, 1),
            duplicate_rate: 0.6,
            tp_score_range: (0.9, 1.0),
            ..SynthConfig::default()
        },
    );
    let csv = dir.path().join("sweep.csv");
    let cfg = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(dir.path().join("detections.json")),
        out: Some(csv.clone()),
        sweep_grid: vec![0.5],
        ..RunConfig::default()
    };
    let rows = cmd_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 1);

    // evaluate after postprocess at nms_iou = 0.5 must agree
    let processed = dir.path().join("processed.json");
    let mut pp = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(dir.path().join("detections.json")),
        out: Some(processed.clone()),
        ..RunConfig::default()
    };
    pp.postprocess.nms_iou = 0.5;
    cmd_postprocess(&pp).unwrap();
    let eval = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(processed),
        ..RunConfig::default()
    };
    let report = cmd_evaluate(&eval).unwrap();
    assert_eq!(rows[0].f1, report.f1);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("nms_iou,f1\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn synth_same_seed_gives_identical_manifests() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        seed: 7,
        num_images: 4,
        jitter: 0.5,
        duplicate_rate: 0.3,
        dropout_rate: 0.1,
        tp_score_range: (0.85, 1.0),
        ..SynthConfig::default()
    };
    synth_fixture(dir_a.path(), cfg.clone());
    synth_fixture(dir_b.path(), cfg);
    for name in ["manifest.json", "gt.json", "detections.json"] {
        assert_eq!(
            std::fs::read(dir_a.path().join(name)).unwrap(),
            std::fs::read(dir_b.path().join(name)).unwrap(),
            "{name} differs between identically seeded runs"
        );
    }
}

#[test]
fn synth_empty_dataset_is_consumable() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path(), SynthConfig { num_images: 0, ..SynthConfig::default() });
    let cfg = RunConfig {
        gt: Some(dir.path().join("gt.json")),
        dt: Some(dir.path().join("detections.json")),
        ..RunConfig::default()
    };
    let report = cmd_evaluate(&cfg).unwrap();
    assert_eq!(report.true_positives, 0);
}

#[test]
fn loss_check_prints_breakdown_and_rejects_bad_batches() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("batch.json");
    std::fs::write(
        &good,
        r#"{
  "gains": {"lambda_cls": 1.0, "lambda_box": 1.0, "lambda_mask": 1.0},
  "samples": [{
    "class_probs": [0.25, 0.75],
    "true_class": 1,
    "pred_box": [10.0, 10.0, 20.0, 20.0],
    "true_box": [11.0, 10.0, 20.0, 22.0],
    "pred_mask": {"height": 1, "width": 2, "data": [0.5, 0.5]},
    "target_mask": {"height": 1, "width": 2, "data": [true, false]},
    "is_positive": true
  }]
}"#,
    )
    .unwrap();
    let output = bin().arg("loss-check").arg("--input").arg(&good).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("total"), "stdout: {stdout}");
    // cls = -ln 0.75, box = |1|+|0|+|0|+|2| = 3, mask = -ln 0.5
    assert!(stdout.contains("box   3.000000"), "stdout: {stdout}");

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"samples": [{
            "class_probs": [0.9, 0.9],
            "true_class": 5,
            "pred_box": [0, 0, 1, 1],
            "true_box": [0, 0, 1, 1],
            "pred_mask": {"height": 1, "width": 1, "data": [0.5]},
            "target_mask": {"height": 1, "width": 1, "data": [true]},
            "is_positive": false
        }]}"#,
    )
    .unwrap();
    let output = bin().arg("loss-check").arg("--input").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 2: missing file
    let output = bin()
        .args(["evaluate", "--gt", "/nonexistent/gt.json", "--dt", "/nonexistent/dt.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // 2: malformed JSON
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{oops").unwrap();
    let output = bin()
        .arg("postprocess")
        .arg("--dt")
        .arg(&broken)
        .arg("--out")
        .arg(dir.path().join("out.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // 0: success end to end
    synth_fixture(dir.path(), SynthConfig { seed: 1, num_images: 2, ..SynthConfig::default() });
    let output = bin()
        .arg("evaluate")
        .arg("--gt")
        .arg(dir.path().join("gt.json"))
        .arg("--dt")
        .arg(dir.path().join("detections.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn no_partial_output_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.json");
    // invalid detections: score out of range fails validation before writing
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"[{"image_id": 1, "category_id": 1, "score": 3.0, "bbox": [0, 0, 2, 2]}]"#,
    )
    .unwrap();
    let output = bin()
        .arg("postprocess")
        .arg("--dt")
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.exists(), "failed command must not leave output files");
    assert!(
        std::fs::read_dir(dir.path())
            .unwrap()
            .all(|e| e.unwrap().file_name() == "bad.json"),
        "no stray temp files"
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(
        dir.path(),
        SynthConfig {
            seed: 21,
            num_images: 3,
            instances_per_image: (1, 1),
            duplicate_rate: 1.0,
            tp_score_range: (0.9, 1.0),
            ..SynthConfig::default()
        },
    );
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[postprocess]\nnms_iou = 0.95\n").unwrap();
    let out = dir.path().join("processed.json");
    let output = bin()
        .arg("postprocess")
        .arg("--config")
        .arg(&config)
        .arg("--dt")
        .arg(dir.path().join("detections.json"))
        .arg("--out")
        .arg(&out)
        .arg("--nms-iou")
        .arg("0.5")
        .output()
        .unwrap();
    assert!(output.status.success());
    // at 0.5 the planted duplicates (IoU 0.9) are suppressed, so the flag won
    let processed = stenokit::dataset_io::load_detections(&out).unwrap();
    let original = stenokit::dataset_io::load_detections(dir.path().join("detections.json")).unwrap();
    assert!(processed.detections.len() < original.detections.len());
}

#[test]
fn threads_flag_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(
        dir.path(),
        SynthConfig {
            seed: 33,
            num_images: 8,
            instances_per_image: (1, 3),
            jitter: 1.0,
            duplicate_rate: 0.5,
            tp_score_range: (0.82, 1.0),
            ..SynthConfig::default()
        },
    );
    let out_1 = dir.path().join("p1.json");
    let out_4 = dir.path().join("p4.json");
    for (threads, out) in [(1usize, &out_1), (4, &out_4)] {
        let cfg = RunConfig {
            dt: Some(dir.path().join("detections.json")),
            out: Some(out.clone()),
            threads,
            ..RunConfig::default()
        };
        cmd_postprocess(&cfg).unwrap();
    }
    assert_eq!(
        std::fs::read(&out_1).unwrap(),
        std::fs::read(&out_4).unwrap(),
        "worker count must not affect output bytes"
    );
}
