//! The full closed loop without a trained model: generate a synthetic
//! fixture with planted corruption, post-process it, evaluate it, and
//! check the metrics against the generator's answer key.
//!
//! Run with: `cargo run --example synthetic_eval`

use stenokit::cli::{cmd_evaluate, cmd_postprocess, cmd_synth, RunConfig};
use stenokit::synth::SynthConfig;

fn main() -> stenokit::Result<()> {
    let dir = tempfile::tempdir()?;
    let fixture = dir.path().join("fixture");

    // plant dropouts (false negatives) and near-duplicates (false
    // positives) on top of jittered true detections; one instance per
    // image keeps every planted detection inside the top-3 cap
    let mut cfg = RunConfig {
        out: Some(fixture.clone()),
        ..RunConfig::default()
    };
    cfg.synth = SynthConfig {
        seed: 2024,
        num_images: 16,
        instances_per_image: (1, 1),
        jitter: 1.0,
        tp_score_range: (0.86, 0.99),
        dup_score_range: (0.8, 0.85),
        duplicate_rate: 0.35,
        dropout_rate: 0.15,
        ..SynthConfig::default()
    };
    let manifest = cmd_synth(&cfg)?;
    println!(
        "planted answer key: tp={} fp={} fn={}\n",
        manifest.planted.true_positives,
        manifest.planted.false_positives,
        manifest.planted.false_negatives
    );

    let processed = dir.path().join("processed.json");
    let pp = RunConfig {
        gt: Some(fixture.join("gt.json")),
        dt: Some(fixture.join("detections.json")),
        out: Some(processed.clone()),
        ..RunConfig::default()
    };
    cmd_postprocess(&pp)?;

    let eval = RunConfig {
        gt: Some(fixture.join("gt.json")),
        dt: Some(processed),
        out: Some(dir.path().join("report.json")),
        ..RunConfig::default()
    };
    println!();
    let report = cmd_evaluate(&eval)?;

    let agrees = report.true_positives == manifest.planted.true_positives
        && report.false_positives == manifest.planted.false_positives
        && report.false_negatives == manifest.planted.false_negatives;
    println!("\nevaluator counts match the planted answer key: {agrees}");
    Ok(())
}
