//! Embeds the instances of a hand-drawn label map and prints the resulting
//! vectors plus their pairwise L1 distances.

use glk::guide::{guided_embedding, init_guides};
use glk::label::LabelMap;

fn main() -> glk::Result<()> {
    // three blocks on a 16x16 canvas: left column, right column, bottom bar
    let (w, h) = (16usize, 16usize);
    let ids = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            match (x, y) {
                (0..=4, 0..=9) => 1,
                (11..=15, 0..=9) => 2,
                (_, 12..=15) => 3,
                _ => 0,
            }
        })
        .collect();
    let map = LabelMap::new(w, h, ids)?;

    let bank = init_guides(4, w, h, 2.0, 11)?;
    println!("bank of {} harmonic guides on a {w}x{h} canvas", bank.d_g());
    for (i, p) in bank.params().iter().enumerate() {
        println!(
            "  guide {i}: freq_x {:6.2}  freq_y {:6.2}  phase {:.3}",
            p.freq_x, p.freq_y, p.phase
        );
    }

    let embeddings: Vec<_> = map
        .instances()
        .iter()
        .map(|inst| (inst.id, guided_embedding(&bank, inst)))
        .collect();
    println!("\nper-instance embeddings (mean guide response over the mask):");
    for (id, e) in &embeddings {
        let cells: Vec<String> = e.values.iter().map(|v| format!("{v:+.4}")).collect();
        println!("  instance {id}: [{}]", cells.join(", "));
    }

    println!("\npairwise L1 distances:");
    for a in 0..embeddings.len() {
        for b in (a + 1)..embeddings.len() {
            let d = embeddings[a].1.l1_distance(&embeddings[b].1);
            println!(
                "  {} vs {}: {d:.4}",
                embeddings[a].0, embeddings[b].0
            );
        }
    }
    Ok(())
}
