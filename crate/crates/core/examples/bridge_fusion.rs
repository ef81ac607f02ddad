//! Shows how the gate blends a fine and a coarse feature map.

use boundary_seg::befbm::{bridge_pair, gate_alpha};
use boundary_seg::rng::SplitMix64;
use boundary_seg::{Graph, Result, Tensor};

fn main() -> Result<()> {
    let mut rng = SplitMix64::new(1);
    let g = Graph::new();
    let fine = g.constant(Tensor::uniform([4, 8, 8], 1.0, &mut rng));
    let coarse = g.constant(Tensor::uniform([4, 4, 4], 1.0, &mut rng));

    for scale in [0.0, 0.5, 5.0, 50.0] {
        let w1 = g.constant(Tensor::full([4], scale));
        let w2 = g.constant(Tensor::full([4], -0.5 * scale));
        let alpha = gate_alpha(&fine, &coarse, &w1, &w2)?;
        let fused = bridge_pair(&fine, &coarse, &alpha)?;
        let drift = fused.value().max_abs_diff(&fine.value());
        println!(
            "weight scale {scale:>5}: alpha = {:.6}, max |fused - fine| = {drift:.4}",
            alpha.item()?
        );
    }
    Ok(())
}
