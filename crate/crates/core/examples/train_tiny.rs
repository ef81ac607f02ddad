//! Trains the default model for a few epochs on a small dataset and writes
//! the usual run artifacts.
//!
//! `cargo run --release --example train_tiny -- [out_dir]`

use boundary_seg::data::DatasetConfig;
use boundary_seg::training::{run_training, OutputPaths, TrainConfig};
use boundary_seg::{ModelConfig, Result};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "train_tiny_run".into());
    let data = DatasetConfig {
        train: 32,
        val: 8,
        test: 8,
        ..DatasetConfig::default()
    }
    .generate()?;
    let cfg = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let paths = OutputPaths::new(&out);
    let (_, summary) = run_training(&ModelConfig::default(), &cfg, &data, Some(&paths))?;
    for e in &summary.epochs {
        let val = e.val.map_or(String::new(), |v| {
            format!(", val mIoU {:.4}, boundary F1 {:.4}", v.miou, v.boundary_f1)
        });
        println!(
            "epoch {}: loss {:.4} (cls {:.4}, mask {:.4}, edge {:.4}){val}",
            e.epoch, e.mean_loss.total, e.mean_loss.cls, e.mean_loss.mask, e.mean_loss.edge
        );
    }
    println!("artifacts in {out}");
    Ok(())
}
