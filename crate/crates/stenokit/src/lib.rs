//! stenokit — the numerical pipeline of a Mask R-CNN-style stenosis
//! detector, minus the network.
//!
//! The crate covers everything around the backbone: anchor-grid generation,
//! RoI-Align pooling, the multi-task loss (classification + box + mask),
//! the tuned inference post-processing chain (NMS 0.95, confidence 0.8,
//! top-3 cap), and F1 / seg-mAP evaluation over COCO-format annotations.
//! Any trained model's serialized detections can be post-processed and
//! scored with it, and every formula is covered by brute-force oracles in
//! the test suite.
//!
//! Start with the runnable examples (`cargo run --example synthetic_eval`,
//! `--example postprocess_chain`, ...) or the `stenokit` binary, which
//! exposes the batch commands `postprocess`, `evaluate`, `sweep`, `synth`,
//! and `loss-check`.

pub mod anchors;
pub mod cli;
pub mod dataset_io;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod postprocess;
pub mod roi_align;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{BBox, Polygon, RleMask};
pub use postprocess::{Detection, IouKind, PostProcessConfig};
