//! The multi-task training loss on a small RoI batch: classification
//! cross-entropy over every RoI, L1 box loss and averaged binary mask
//! cross-entropy over the positive RoIs, combined with the gain
//! coefficients.
//!
//! Run with: `cargo run --example loss_breakdown`

use stenokit::geometry::BBox;
use stenokit::losses::{
    assign_positive, mask_target, total_loss, Grid, LossGains, RoiSample,
    POSITIVE_IOU_THRESHOLD,
};
use stenokit::Polygon;

fn main() -> stenokit::Result<()> {
    // ground truth: one instance; proposals: one good, one poor
    let gt_box = BBox::from_xywh(20.0, 20.0, 24.0, 24.0)?;
    let gt_mask = Polygon::new(vec![(22.0, 22.0), (42.0, 22.0), (42.0, 42.0), (22.0, 42.0)])?
        .to_mask(64, 64)?;

    let good_roi = BBox::from_xywh(18.0, 22.0, 24.0, 24.0)?;
    let poor_roi = BBox::from_xywh(40.0, 40.0, 24.0, 24.0)?;
    for (name, roi) in [("good", &good_roi), ("poor", &poor_roi)] {
        match assign_positive(roi, &[gt_box]) {
            Some(idx) => println!(
                "{name} proposal: IoU {:.3} >= {POSITIVE_IOU_THRESHOLD} -> positive (instance {idx})",
                roi.iou(&gt_box)
            ),
            None => println!(
                "{name} proposal: IoU {:.3} <  {POSITIVE_IOU_THRESHOLD} -> negative",
                roi.iou(&gt_box)
            ),
        }
    }

    // the positive RoI trains the mask head against the cropped target
    let target = mask_target(&good_roi, &gt_mask, 14, 14)?;
    let fg = target.data().iter().filter(|&&b| b).count();
    println!("\n14x14 mask target from the good proposal: {fg} foreground cells");

    // mildly confident predictions on the positive, confused on the negative
    let positive = RoiSample {
        class_probs: vec![0.1, 0.9],
        true_class: 1,
        pred_box: good_roi.to_xywh(),
        true_box: gt_box.to_xywh(),
        pred_mask: Grid::new(
            14,
            14,
            target.data().iter().map(|&b| if b { 0.8 } else { 0.15 }).collect(),
        )?,
        target_mask: target,
        is_positive: true,
    };
    let negative = RoiSample {
        class_probs: vec![0.55, 0.45],
        true_class: 0,
        pred_box: poor_roi.to_xywh(),
        true_box: gt_box.to_xywh(),
        pred_mask: Grid::new(14, 14, vec![0.5; 196])?,
        target_mask: Grid::new(14, 14, vec![false; 196])?,
        is_positive: false,
    };

    let batch = vec![positive, negative];
    let unit = total_loss(&batch, &LossGains::default())?;
    println!("\nunit gains (1, 1, 1):");
    println!("  cls   {:.6}   (mean over all RoIs)", unit.cls);
    println!("  box   {:.6}   (mean over positive RoIs)", unit.r#box);
    println!("  mask  {:.6}   (mean over positive masks)", unit.mask);
    println!("  total {:.6}", unit.total);

    let heavy_mask = total_loss(
        &batch,
        &LossGains {
            lambda_cls: 1.0,
            lambda_box: 1.0,
            lambda_mask: 4.0,
        },
    )?;
    println!("\nmask gain raised to 4: total {:.6}", heavy_mask.total);
    Ok(())
}
