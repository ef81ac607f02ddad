//! Compares training with and without the boundary loss on a short
//! schedule.
//!
//! `cargo run --release --example ablation`

use boundary_seg::data::DatasetConfig;
use boundary_seg::training::{run_ablation, TrainConfig};
use boundary_seg::{ModelConfig, Result};

fn main() -> Result<()> {
    let data = DatasetConfig {
        train: 32,
        val: 16,
        test: 1,
        ..DatasetConfig::default()
    }
    .generate()?;
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let report = run_ablation(&ModelConfig::default(), &cfg, &data, &[0.0, 0.1], &[0, 1, 2])?;
    for arm in &report.arms {
        println!(
            "lambda3 = {}: median mIoU {:.4}, median boundary F1 {:.4}",
            arm.lambda3, arm.miou, arm.boundary_f1
        );
    }
    println!(
        "boundary head untouched without edge loss: {}",
        report.zero_lambda_boundary_grads_zero
    );
    Ok(())
}
