//! Scores predictions against ground truth with best dice, symmetric best
//! dice, and the leaf-count difference, including the classic
//! under-segmentation trap that only the symmetric score catches.

use glk::label::LabelMap;
use glk::metrics::{best_dice, dic, sbd};
use glk::synth::{perturb, PerturbSpec};

fn three_leaf_map() -> LabelMap {
    let (w, h) = (18usize, 6usize);
    let ids = (0..w * h)
        .map(|i| match i % w {
            0..=4 => 1,
            6..=10 => 2,
            12..=16 => 3,
            _ => 0,
        })
        .collect();
    LabelMap::new(w, h, ids).unwrap()
}

fn report(label: &str, pred: &LabelMap, gt: &LabelMap) -> glk::Result<()> {
    let (p, g) = (pred.instances(), gt.instances());
    println!(
        "{label}: BD {:.2}  SBD {:.2}  |DiC| {}",
        best_dice(&p, &g)?,
        sbd(&p, &g)?,
        dic(&p, &g)
    );
    Ok(())
}

fn main() -> glk::Result<()> {
    let gt = three_leaf_map();
    println!("ground truth has {} leaves of equal size", gt.instances().len());

    report("identical prediction   ", &gt, &gt)?;

    // predicting a single perfectly matched leaf still gives perfect BD:
    // every predicted mask finds a flawless partner, the misses are free
    let one = LabelMap::new(
        gt.width(),
        gt.height(),
        (0..gt.width() * gt.height())
            .map(|i| u32::from(i % gt.width() <= 4))
            .collect(),
    )?;
    report("one-leaf under-segment ", &one, &gt)?;

    // merging all leaves into one blob is caught from both directions
    let merged = LabelMap::new(
        gt.width(),
        gt.height(),
        (0..gt.width() * gt.height())
            .map(|i| u32::from(i % gt.width() <= 16))
            .collect(),
    )?;
    report("single merged blob     ", &merged, &gt)?;

    // random boundary damage scores between the extremes
    let spec = PerturbSpec {
        drop_prob: 0.0,
        merge_prob: 0.0,
        boundary_radius: 1,
        seed: 3,
    };
    let noisy = perturb(&gt, &spec)?.to_labelmap()?;
    report("eroded/dilated leaves  ", &noisy, &gt)?;
    Ok(())
}
