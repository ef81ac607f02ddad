//! Saves a model, reloads it into a differently seeded one, and confirms
//! the predictions agree exactly.

use boundary_seg::data::{DatasetConfig, Split};
use boundary_seg::imaging::colorize_labels;
use boundary_seg::imaging::palette;
use boundary_seg::imaging::pnm::write_ppm;
use boundary_seg::{Model, ModelConfig, Result};

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("bseg_checkpoint_example");
    std::fs::create_dir_all(&dir).ok();
    let path = dir.join("model.ckpt");

    let original = Model::new(ModelConfig::default(), 7)?;
    original.save(&path)?;
    let mut restored = Model::new(ModelConfig::default(), 8)?;
    restored.load(&path)?;

    let image = DatasetConfig::default().sample(Split::Test, 0)?.image;
    let (a, b) = (original.predict(&image)?, restored.predict(&image)?);
    println!(
        "checkpoint {} bytes",
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );
    println!("mask max difference after reload: {:e}", a.masks.max_abs_diff(&b.masks));
    println!("labels identical: {}", a.labels == b.labels);

    let colored = colorize_labels(&b.labels, &palette(4))?;
    write_ppm(dir.join("prediction.ppm"), &colored)?;
    println!("wrote {}", dir.join("prediction.ppm").display());
    Ok(())
}
