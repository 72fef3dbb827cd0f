//! Derives the guided-embedding regression target for a label map, shows the
//! edge-weighted loss mask, and assembles the combined training loss.

use ndarray::Array2;

use glk::fusion::{
    bce_loss, dice_loss, gt_guided_target, guided_l1_loss, total_loss, FeatureGrid,
    LossComponents, LossWeights,
};
use glk::guide::init_guides;
use glk::label::LabelMap;

fn main() -> glk::Result<()> {
    // two touching squares so an instance boundary runs down the middle
    let (w, h) = (20usize, 12usize);
    let ids = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if (2..10).contains(&y) {
                if (2..10).contains(&x) {
                    1
                } else if (10..18).contains(&x) {
                    2
                } else {
                    0
                }
            } else {
                0
            }
        })
        .collect();
    let map = LabelMap::new(w, h, ids)?;

    let bank = init_guides(2, w, h, 2.0, 5)?;
    let (target, weights) = gt_guided_target(&map, &bank);

    println!("loss weight per pixel (. = background, contributes nothing):");
    for y in 0..h {
        let row: String = (0..w)
            .map(|x| {
                let v = weights[(y, x)];
                if v == 0.0 {
                    '.'
                } else if v == 1.0 {
                    '1'
                } else {
                    '3'
                }
            })
            .collect();
        println!("  {row}");
    }
    println!("pixels near the shared boundary carry the heavier weight");

    // a prediction matching the target scores zero; blurring it does not
    let perfect = guided_l1_loss(&target, &target, &weights)?;
    let blurred = FeatureGrid::new(target.values() * 0.9)?;
    let degraded = guided_l1_loss(&blurred, &target, &weights)?;
    println!("\nguided L1: perfect {perfect:.4}, after a 10% shrink {degraded:.4}");

    // combined objective with the default weighting
    let gt_mask = Array2::from_shape_fn((h, w), |(y, x)| f64::from(map.id_at(x, y) != 0));
    let soft_pred = gt_mask.mapv(|v| v * 0.85 + 0.05);
    let components = LossComponents {
        guide_l1: degraded,
        ce: bce_loss(soft_pred.view(), gt_mask.view())?,
        dice: dice_loss(soft_pred.view(), gt_mask.view())?,
        cls: 0.1,
    };
    let weights = LossWeights::default();
    println!(
        "\ncomponents: guide {:.4}, ce {:.4}, dice {:.4}, cls {:.4}",
        components.guide_l1, components.ce, components.dice, components.cls
    );
    println!("weighted total: {:.4}", total_loss(&components, &weights));
    Ok(())
}
