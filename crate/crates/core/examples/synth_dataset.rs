//! Writes a small synthetic dataset to disk, reloads it, and prints the
//! class balance of each split.
//!
//! `cargo run --example synth_dataset -- [out_dir]`

use boundary_seg::data::{generate_dataset, load_dataset, DatasetConfig, Split, CLASS_NAMES};
use boundary_seg::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_data".into());
    let config = DatasetConfig {
        train: 20,
        val: 5,
        test: 5,
        ..DatasetConfig::default()
    };
    let manifest = generate_dataset(&config, &out)?;
    let dataset = load_dataset(&manifest, CLASS_NAMES.len())?;
    for split in Split::ALL {
        let mut counts = [0usize; 4];
        for sample in dataset.split(split) {
            for (c, n) in sample.labels.histogram(4).into_iter().enumerate() {
                counts[c] += n;
            }
        }
        let total: usize = counts.iter().sum();
        let shares: Vec<String> = CLASS_NAMES
            .iter()
            .zip(counts)
            .map(|(name, n)| format!("{name} {:.1}%", 100.0 * n as f64 / total as f64))
            .collect();
        println!("{split}: {} samples, {}", dataset.split(split).len(), shares.join(", "));
    }
    println!("manifest at {}", manifest.display());
    Ok(())
}
