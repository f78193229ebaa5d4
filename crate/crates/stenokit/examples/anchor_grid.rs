//! Proposal anchors: the tuned size/ratio grid, and decoding regressed
//! deltas back into boxes.
//!
//! Run with: `cargo run --example anchor_grid`

use stenokit::anchors::{clip_boxes, decode_deltas, generate_anchors, AnchorConfig};
use stenokit::BBox;

fn main() -> stenokit::Result<()> {
    let cfg = AnchorConfig::default();
    println!("sizes   {:?}", cfg.sizes);
    println!("ratios  {:?}", cfg.ratios);
    println!("strides {:?}", cfg.strides);

    // a 32x32-cell level at stride 16 covers a 512x512 image
    let anchors = generate_anchors(&cfg, 32, 32, 16)?;
    println!(
        "\n32x32 grid: {} anchors ({} per cell)",
        anchors.len(),
        cfg.sizes.len() * cfg.ratios.len()
    );
    println!("first cell's anchors (centered at (8, 8)):");
    for a in &anchors[..cfg.sizes.len() * cfg.ratios.len()] {
        println!(
            "  {:7.2} x {:6.2}  area {:8.2}  h/w {:.2}",
            a.width(),
            a.height(),
            a.area(),
            a.height() / a.width()
        );
    }

    // anchors near the border spill out; clipping clamps them to the canvas
    let clipped = clip_boxes(&anchors, 512, 512);
    let spilling = anchors
        .iter()
        .zip(&clipped)
        .filter(|(raw, cut)| raw != cut)
        .count();
    println!("\n{spilling} anchors spill past the 512x512 canvas and get clipped");

    // the box head regresses (dx, dy, dw, dh) deltas on top of each anchor
    let anchor = BBox::from_xywh(100.0, 100.0, 32.0, 32.0)?;
    let refined = decode_deltas(&anchor, (0.25, -0.1, 0.2, -0.3));
    println!("\nanchor   {:?}", anchor.to_xywh());
    println!("refined  {:?}", refined.to_xywh());
    println!("identity {:?}", decode_deltas(&anchor, (0.0, 0.0, 0.0, 0.0)).to_xywh());
    Ok(())
}
