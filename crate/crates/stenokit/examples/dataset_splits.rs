//! Deterministic dataset splitting: the 1190/10 and 800/200 partitions,
//! reproducible from a seed on any machine.
//!
//! Run with: `cargo run --example dataset_splits`

use std::collections::HashSet;

use stenokit::dataset_io::split;
use stenokit::synth::{generate, SynthConfig};

fn main() -> stenokit::Result<()> {
    // a 1200-image stand-in for the real annotation file
    let out = generate(&SynthConfig {
        seed: 1,
        num_images: 1200,
        instances_per_image: (1, 1),
        image_size: 64,
        ..SynthConfig::default()
    })?;
    let gt = out.ground_truth;
    println!(
        "dataset: {} images, {} annotations",
        gt.images.len(),
        gt.annotations.len()
    );

    let parts = split(&gt, &[1190, 10], 7)?;
    println!(
        "\nsplit [1190, 10] with seed 7: {} / {} images, {} / {} annotations",
        parts[0].images.len(),
        parts[1].images.len(),
        parts[0].annotations.len(),
        parts[1].annotations.len()
    );
    let ids0: HashSet<u64> = parts[0].images.iter().map(|im| im.id).collect();
    let ids1: HashSet<u64> = parts[1].images.iter().map(|im| im.id).collect();
    println!("disjoint: {}   exhaustive: {}", ids0.is_disjoint(&ids1), ids0.len() + ids1.len() == 1200);
    println!("validation images: {:?}", parts[1].images.iter().map(|im| im.id).collect::<Vec<_>>());

    let again = split(&gt, &[1190, 10], 7)?;
    println!("same seed reproduces the partition: {}", parts == again);
    let other = split(&gt, &[1190, 10], 8)?;
    println!("a different seed does not: {}", parts != other);

    // earlier-phase style split on the first 1000 images
    let first_thousand = split(&gt, &[1000, 200], 3)?;
    let phase1 = split(&first_thousand[0], &[800, 200], 3)?;
    println!(
        "\nnested split: 1200 -> [1000, 200], then 1000 -> [800, 200] = {} / {} images",
        phase1[0].images.len(),
        phase1[1].images.len()
    );
    Ok(())
}
