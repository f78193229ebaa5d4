//! The tuned inference post-processing chain, stage by stage: confidence
//! filter at 0.8, class-aware greedy NMS at IoU 0.95, top-3 cap.
//!
//! Run with: `cargo run --example postprocess_chain`

use stenokit::postprocess::{
    confidence_filter, nms, run_pipeline, top_k, Detection, IouKind, PostProcessConfig,
};
use stenokit::BBox;

fn det(score: f64, x: f64, y: f64) -> Detection {
    Detection {
        image_id: 1,
        class_id: 1,
        score,
        bbox: BBox::from_xywh(x, y, 40.0, 40.0).unwrap(),
        mask: None,
    }
}

fn main() {
    let cfg = PostProcessConfig::default();
    println!(
        "defaults: nms_iou {}  score_threshold {}  max_detections {}  rpn_nms_iou {}",
        cfg.nms_iou, cfg.score_threshold, cfg.max_detections, cfg.rpn_nms_iou
    );

    // a raw head output: one strong lesion with a near-duplicate, three more
    // candidates, and low-confidence noise
    let raw = vec![
        det(0.99, 10.0, 10.0),
        det(0.97, 10.6, 10.0), // near-duplicate of the first (IoU > 0.95)
        det(0.91, 120.0, 40.0),
        det(0.88, 240.0, 90.0),
        det(0.83, 360.0, 150.0),
        det(0.74, 60.0, 300.0), // below the confidence threshold
        det(0.41, 200.0, 200.0),
    ];
    println!("\nraw detections: {}", raw.len());

    let confident = confidence_filter(&raw, cfg.score_threshold);
    println!("after confidence >= {}: {}", cfg.score_threshold, confident.len());

    let kept = nms(&confident, cfg.nms_iou, IouKind::Box);
    println!("after NMS @ {}: {} (near-duplicate suppressed)", cfg.nms_iou, kept.len());

    let capped = top_k(&kept, cfg.max_detections);
    println!("after top-{} cap: {}", cfg.max_detections, capped.len());
    for d in &capped {
        println!("  kept score {:.2} at {:?}", d.score, d.bbox.to_xywh());
    }

    // the one-call form applies the same three stages
    let pipeline = run_pipeline(&raw, &cfg, IouKind::Box);
    assert_eq!(pipeline, capped);
    println!("\nrun_pipeline == filter -> nms -> cap: {}", pipeline == capped);

    // a looser NMS threshold would also merge genuinely distinct
    // overlapping findings; 0.95 removes only near-duplicates
    let strict = run_pipeline(
        &raw,
        &PostProcessConfig { nms_iou: 0.5, ..cfg },
        IouKind::Box,
    );
    println!(
        "with nms_iou 0.5 instead: {} survivors (same here — the fixture only has one duplicate pair)",
        strict.len()
    );
}
