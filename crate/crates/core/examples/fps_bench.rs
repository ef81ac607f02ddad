//! Measures single-image inference throughput of the default model.

use boundary_seg::commands::bench_model;
use boundary_seg::metrics::{FPS_TIMED, FPS_WARMUP};
use boundary_seg::{Model, ModelConfig, Result};

fn main() -> Result<()> {
    let model = Model::new(ModelConfig::default(), 0)?;
    let report = bench_model(&model, FPS_WARMUP, FPS_TIMED)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
