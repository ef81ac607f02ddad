//! The operations behind each `bseg` subcommand, usable without the binary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::data::{generate_dataset, load_or_generate, Dataset, Split};
use crate::decoder::semantic_argmax;
use crate::error::{Error, Result};
use crate::imaging::pnm::{read_ppm, write_pgm, write_ppm, Gray};
use crate::imaging::{colorize_labels, palette, Image, LabelMap};
use crate::metrics::{boundary_pixels, fps_bench, FpsReport, MetricsReport, FPS_TIMED, FPS_WARMUP};
use crate::model::Model;
use crate::tensor::Graph;
use crate::training::{class_names, evaluate, run_ablation, run_training, AblationReport, OutputPaths, TrainSummary};
use crate::verify::{run_all, VerifyReport};

pub fn gen_data(config: &RunConfig) -> Result<PathBuf> {
    generate_dataset(&config.dataset_config(), &config.data_dir)
}

pub fn load_data(config: &RunConfig) -> Result<Dataset> {
    load_or_generate(&config.dataset_config(), &config.data_dir)
}

/// Trains with the run configuration and writes artifacts to `out_dir`.
pub fn train(config: &RunConfig) -> Result<TrainSummary> {
    let dataset = load_data(config)?;
    let out = OutputPaths::new(&config.out_dir);
    Ok(run_training(&config.model_config(), &config.train_config(), &dataset, Some(&out))?.1)
}

/// Ablation over `λ₃ ∈ {0, lambda3}` (0.1 when the configured value is 0);
/// writes `ablation.json` to `out_dir`.
pub fn ablation(config: &RunConfig, seeds: &[u64]) -> Result<AblationReport> {
    let dataset = load_data(config)?;
    let active = if config.lambda3 > 0.0 { config.lambda3 } else { 0.1 };
    let report = run_ablation(
        &config.model_config(),
        &config.train_config(),
        &dataset,
        &[0.0, active],
        seeds,
    )?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let path = config.out_dir.join("ablation.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

pub fn load_model(config: &RunConfig, checkpoint: &Path) -> Result<Model> {
    let mut model = Model::new(config.model_config(), config.seed)?;
    model.load(checkpoint)?;
    Ok(model)
}

/// Throughput of single-image forward passes.
pub fn bench_model(model: &Model, warmup: usize, timed: usize) -> Result<FpsReport> {
    let (h, w) = model.config.image_size;
    let image = Image::filled(h, w, [0.5; 3])?.to_tensor();
    fps_bench(
        || {
            let g = Graph::new();
            let p = model.bind(&g);
            let out = model.forward(&g.constant(image.clone()), &p)?;
            semantic_argmax(&out.masks.value()).map(|_| ())
        },
        (h, w),
        warmup,
        timed,
    )
}

pub fn eval(config: &RunConfig, checkpoint: &Path, split: Split, with_fps: bool) -> Result<MetricsReport> {
    let model = load_model(config, checkpoint)?;
    let dataset = load_data(config)?;
    let fps = if with_fps {
        bench_model(&model, FPS_WARMUP, FPS_TIMED)?.fps
    } else {
        0.0
    };
    evaluate(&model, dataset.split(split))?.report(&class_names(model.config.num_classes), fps)
}

/// Files written for one inference input.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct InferOutput {
    pub input: String,
    pub prediction: PathBuf,
    pub boundary: PathBuf,
    pub edges: PathBuf,
}

fn labels_to_gray(labels: &LabelMap, mask: &[bool]) -> Gray {
    Gray {
        height: labels.height(),
        width: labels.width(),
        bytes: mask.iter().map(|&b| if b { 255 } else { 0 }).collect(),
    }
}

/// For each image writes the colorized prediction (`*_pred.ppm`), the
/// boundary of the predicted label map (`*_boundary.pgm`) and the finest
/// boundary-head output upsampled to full size (`*_edges.pgm`).
pub fn infer(model: &Model, inputs: &[(String, Image)], out_dir: &Path) -> Result<Vec<InferOutput>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let colors = palette(model.config.num_classes);
    let mut written = Vec::new();
    for (name, image) in inputs {
        let pred = model.predict(image)?;
        let prediction = out_dir.join(format!("{name}_pred.ppm"));
        write_ppm(&prediction, &colorize_labels(&pred.labels, &colors)?)?;
        let boundary = out_dir.join(format!("{name}_boundary.pgm"));
        write_pgm(&boundary, &labels_to_gray(&pred.labels, &boundary_pixels(&pred.labels)))?;

        let (h, w) = image.dims();
        let b1 = &pred.boundary[0];
        let (bh, bw) = (b1.shape()[1], b1.shape()[2]);
        let bytes = (0..h * w)
            .map(|i| {
                let (r, c) = (i / w * bh / h, i % w * bw / w);
                (b1.data()[r * bw + c] * 255.0).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        let edges = out_dir.join(format!("{name}_edges.pgm"));
        write_pgm(
            &edges,
            &Gray {
                height: h,
                width: w,
                bytes,
            },
        )?;
        written.push(InferOutput {
            input: name.clone(),
            prediction,
            boundary,
            edges,
        });
    }
    Ok(written)
}

/// Reads PPM inputs, naming each output after the file stem.
pub fn read_inputs(paths: &[PathBuf]) -> Result<Vec<(String, Image)>> {
    paths
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
            Ok((stem, read_ppm(p)?))
        })
        .collect()
}

pub fn verify(composite_seeds: u64) -> VerifyReport {
    run_all(composite_seeds)
}
