//! Generates a rosette dataset on disk and summarizes what came out:
//! leaf counts, occlusion, and the phyllotactic size ordering.

use glk::manifest::load_dataset;
use glk::synth::{generate_dataset, generate_plant_detailed, RosetteConfig};

fn main() -> glk::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = RosetteConfig {
        n_min: 4,
        n_max: 6,
        seed: 17,
        ..RosetteConfig::for_size(96, 96)
    };
    let manifest = generate_dataset(&cfg, 12, dir.path())?;
    println!("wrote {}", manifest.display());

    let dataset = load_dataset(&manifest)?;
    for img in &dataset {
        let areas: Vec<usize> = img.map.instances().iter().map(|s| s.pixels().len()).collect();
        println!("  {}: {} leaves, areas {:?}", img.plant_id, areas.len(), areas);
    }

    // regenerate one plant with bookkeeping to inspect the whorl structure
    let sample = generate_plant_detailed(&cfg, 1)?;
    println!(
        "\nsample plant: {} leaves, occlusion present: {}",
        sample.map.instances().len(),
        sample.occluded
    );
    for (inst, whorl) in sample.map.instances().iter().zip(&sample.whorls) {
        println!(
            "  leaf {} sits on whorl {}, visible area {}",
            inst.id,
            whorl,
            inst.pixels().len()
        );
    }
    println!("outer whorls grow longer, so whorl index tends to track area");

    // compact ascii rendering of the first plant
    let map = &dataset[0].map;
    println!("\n{} rendered (digits are leaf ids):", dataset[0].plant_id);
    for y in (0..map.height()).step_by(3) {
        let row: String = (0..map.width())
            .step_by(2)
            .map(|x| {
                let id = map.id_at(x, y);
                if id == 0 {
                    '.'
                } else {
                    char::from_digit(id, 10).unwrap_or('#')
                }
            })
            .collect();
        println!("  {row}");
    }
    Ok(())
}
