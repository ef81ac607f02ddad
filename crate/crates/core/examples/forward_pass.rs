//! Runs one forward pass of the default model and prints every stage.

use boundary_seg::data::{DatasetConfig, Split};
use boundary_seg::{Graph, Model, ModelConfig, Result};

fn main() -> Result<()> {
    let model = Model::new(ModelConfig::default(), 0)?;
    println!(
        "{} parameter tensors, {} scalars",
        model.params.len(),
        model.params.num_scalars()
    );

    let sample = DatasetConfig::default().sample(Split::Val, 0)?;
    let g = Graph::new();
    let p = model.bind(&g);
    let out = model.forward(&g.constant(sample.image.to_tensor()), &p)?;
    for (l, (raw, enc)) in out.raw.iter().zip(&out.encoded).enumerate() {
        println!("scale {}: features {:?}, encoded {:?}", l + 1, raw.shape(), enc.shape());
    }
    for level in &out.bridged.levels {
        println!("bridge alpha = {:.4}", level.alpha.item()?);
    }
    for (l, b) in out.boundary.iter().enumerate() {
        println!("boundary map {}: {:?}", l + 1, b.shape());
    }
    println!(
        "queries {:?}, masks {:?}, class probs {:?}",
        out.queries.shape(),
        out.masks.shape(),
        out.class_probs.shape()
    );
    Ok(())
}
