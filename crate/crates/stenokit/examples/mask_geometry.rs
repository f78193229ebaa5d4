//! Box and mask geometry basics: IoU in both worlds, polygon
//! rasterization, and the RLE round trip.
//!
//! Run with: `cargo run --example mask_geometry`

use stenokit::{BBox, Polygon, RleMask};

fn main() -> stenokit::Result<()> {
    let a = BBox::new(0.0, 0.0, 2.0, 2.0)?;
    let b = BBox::new(1.0, 1.0, 3.0, 3.0)?;
    println!("box IoU of two overlapping unit-offset squares: {}", a.iou(&b));
    println!("xywh form of the first box: {:?}", a.to_xywh());

    // a lesion-ish blob as a polygon, rasterized at pixel centers
    let blob = Polygon::new(vec![
        (3.0, 2.0),
        (11.0, 3.0),
        (13.0, 9.0),
        (8.0, 13.0),
        (2.5, 8.5),
    ])?;
    let mask = blob.to_mask(16, 16)?;
    println!("\nrasterized blob: {} foreground pixels on a 16x16 canvas", mask.area());
    println!("run-length encoding ({} runs): {:?}", mask.runs().len(), mask.runs());

    // decode -> encode is the identity
    let bits = mask.decode();
    let back = RleMask::encode(&bits, 16, 16)?;
    println!("round trip reproduces the mask: {}", back == mask);

    // render it
    println!("\nmask (column-major storage, shown row by row):");
    for row in 0..16 {
        let line: String = (0..16)
            .map(|col| if mask.get(row, col) { '#' } else { '.' })
            .collect();
        println!("  {line}");
    }

    let shifted = blob.translate(1.5, 0.0).to_mask(16, 16)?;
    println!("mask IoU against a 1.5 px shifted copy: {:.4}", mask.iou(&shifted)?);
    Ok(())
}
