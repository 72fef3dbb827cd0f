//! Trains a guide bank on a small synthetic rosette set and reports how the
//! separation loss falls and how far apart the instance embeddings end up.

use glk::guide::{init_guides, pair_l1_distances, train_guides, GuideTrainConfig};
use glk::label::LabelMap;
use glk::synth::{generate_plant, RosetteConfig};

fn pair_stats(distances: &[f64]) -> (f64, f64) {
    let min = distances.iter().fold(f64::INFINITY, |m, &d| m.min(d));
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    (min, mean)
}

fn main() -> glk::Result<()> {
    let cfg = RosetteConfig::for_size(96, 96);
    let maps: Vec<LabelMap> = (0..8)
        .map(|i| generate_plant(&cfg, i))
        .collect::<glk::Result<_>>()?;
    let leaves: usize = maps.iter().map(|m| m.instances().len()).sum();
    println!("training set: {} plants, {leaves} leaves total", maps.len());

    // four guides is deliberately tight: random draws rarely separate 31
    // leaves on their own, so the optimizer has real work to do
    let init = init_guides(4, 96, 96, 2.0, 0)?;
    let (min0, mean0) = pair_stats(&pair_l1_distances(&init, &maps));
    println!("before: min pair distance {min0:.3}, mean {mean0:.3}");

    let train_cfg = GuideTrainConfig {
        epochs: 300,
        ..GuideTrainConfig::default()
    };
    let result = train_guides(&maps, &train_cfg, init)?;

    println!("loss trajectory:");
    for epoch in (0..result.history.len()).step_by(60) {
        println!("  epoch {epoch:>4}: {:.6}", result.history[epoch]);
    }
    println!(
        "  epoch {:>4}: {:.6}",
        result.history.len() - 1,
        result.history.last().unwrap()
    );

    let after = pair_l1_distances(&result.bank, &maps);
    let (min1, mean1) = pair_stats(&after);
    let margin = result.bank.epsilon();
    let clear = after.iter().filter(|&&d| d >= margin).count();
    println!("after:  min pair distance {min1:.3}, mean {mean1:.3}");
    println!(
        "{clear} of {} pairs clear the margin {margin} and contribute zero loss",
        after.len()
    );
    Ok(())
}
