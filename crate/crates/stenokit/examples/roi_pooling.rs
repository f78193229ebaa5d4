//! RoI-Align: pooling a continuous region of a feature map into the fixed
//! grids the box and mask heads consume.
//!
//! Run with: `cargo run --example roi_pooling`

use stenokit::geometry::BBox;
use stenokit::roi_align::{
    roi_align, FeatureMap, BOX_HEAD_POOL, DEFAULT_SAMPLING_RATIO, MASK_HEAD_POOL,
};

fn main() -> stenokit::Result<()> {
    // a smooth synthetic feature map: one channel, ramp plus a bump
    let fm = FeatureMap::from_fn(1, 32, 32, |_, y, x| {
        let dy = y as f64 - 16.0;
        let dx = x as f64 - 16.0;
        0.05 * (x as f64 + y as f64) + 2.0 * (-(dx * dx + dy * dy) / 40.0).exp()
    });

    let roi = BBox::new(10.0, 10.0, 22.0, 22.0)?;
    let (bh, bw) = BOX_HEAD_POOL;
    let pooled = roi_align(&fm, &roi, bh, bw, DEFAULT_SAMPLING_RATIO)?;
    println!(
        "pooled {}x{} grid for the box head (sampling ratio {}):",
        bh, bw, DEFAULT_SAMPLING_RATIO
    );
    for y in 0..bh {
        let row: Vec<String> = (0..bw)
            .map(|x| format!("{:5.2}", pooled.get(0, y, x)))
            .collect();
        println!("  {}", row.join(" "));
    }

    let (mh, mw) = MASK_HEAD_POOL;
    let mask_feat = roi_align(&fm, &roi, mh, mw, DEFAULT_SAMPLING_RATIO)?;
    println!(
        "\nmask head pools the same RoI at {}x{}: {} values",
        mh,
        mw,
        mask_feat.values().len()
    );

    // bilinear pooling preserves constants exactly
    let flat = FeatureMap::constant(1, 32, 32, 7.0);
    let out = roi_align(&flat, &roi, 3, 3, 2)?;
    println!("\nconstant map pools to a constant: {:?}", out.values());

    // regions beyond the map read zero-padded samples
    let outside = roi_align(&fm, &BBox::new(40.0, 40.0, 50.0, 50.0)?, 2, 2, 2)?;
    println!("RoI fully outside the map pools to {:?}", outside.values());
    Ok(())
}
