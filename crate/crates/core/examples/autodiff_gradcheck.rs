//! Builds a small graph, runs reverse mode, and checks the gradient
//! against central differences.

use boundary_seg::rng::SplitMix64;
use boundary_seg::tensor::{grad_check, DEFAULT_STEP};
use boundary_seg::{Graph, Result, Tensor};

fn main() -> Result<()> {
    let mut rng = SplitMix64::new(0);
    let x = Tensor::uniform([2, 3], 1.0, &mut rng);
    let w = Tensor::uniform([3, 4], 1.0, &mut rng);

    let g = Graph::new();
    let xv = g.leaf(x.clone());
    let loss = xv
        .matmul(&g.constant(w.clone()))?
        .silu()
        .softmax()
        .log_clamped(1e-12)
        .mean()
        .neg();
    g.backward(loss)?;
    println!("loss = {:.6}", loss.item()?);
    println!("dL/dx = {:?}", xv.grad().unwrap().data());

    let report = grad_check(
        |g, x| {
            Ok(x.matmul(&g.constant(w.clone()))?
                .silu()
                .softmax()
                .log_clamped(1e-12)
                .mean()
                .neg())
        },
        &x,
        DEFAULT_STEP,
    )?;
    println!(
        "max relative error over {} coords: {:.2e}",
        report.coords_checked, report.max_rel_error
    );
    Ok(())
}
