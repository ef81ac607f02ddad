//! Optimization loop: per-sample forward/backward, batch-mean gradients,
//! global-norm clipping, Adam updates, CSV logging, checkpointing and the
//! `λ₃` ablation harness.
//!
//! Samples within a batch are processed one after another and their
//! gradients summed in index order, so a `(seed, config)` pair determines
//! every loss value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, CLASS_NAMES};
use crate::error::{Error, Result};
use crate::imaging::{augment_crop_scale, build_edge_pyramid, sobel_edge, Sample, DEFAULT_SCALE_RANGE};
use crate::losses::{LossBreakdown, LossWeights};
use crate::metrics::{Evaluator, MetricsReport};
use crate::model::{Model, ModelConfig};
use crate::params::{ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, Tensor};

pub const LOSS_CSV_HEADER: &str = "epoch,step,total,cls,mask,edge";
pub const VAL_CSV_HEADER: &str = "epoch,miou,mdice,mrecall,boundary_f1";
pub const BOUNDARY_TOLERANCE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    /// Multiply the learning rate by `gamma` every `every_epochs` epochs.
    pub every_epochs: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: Option<LrDecay>,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub weights: LossWeights,
    pub augment: bool,
    /// Evaluate on the validation split after every epoch.
    pub validate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 30,
            batch_size: 8,
            lr: 1e-3,
            lr_decay: None,
            grad_clip: Some(10.0),
            weights: LossWeights::default(),
            augment: true,
            validate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", "must be a finite value > 0"));
        }
        if let Some(decay) = self.lr_decay {
            if decay.every_epochs == 0 || !(decay.gamma > 0.0 && decay.gamma <= 1.0) {
                return Err(Error::config("lr_decay", "needs every_epochs >= 1 and gamma in (0, 1]"));
            }
        }
        if let Some(clip) = self.grad_clip {
            if !(clip.is_finite() && clip > 0.0) {
                return Err(Error::config("grad_clip", "must be a finite value > 0"));
            }
        }
        self.weights.validate()
    }

    /// Learning rate for a 1-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.lr * d.gamma.powi((epoch.saturating_sub(1) / d.every_epochs) as i32),
            None => self.lr,
        }
    }
}

/// Adam with decays 0.9 / 0.999 and stabilizer 1e-8.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: params.tensors().iter().map(Tensor::zeros_like).collect(),
            v: params.tensors().iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor], lr: f64) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<ParamId> = params.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.get_mut(id).data_mut();
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                p[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
            if !params.get(id).is_finite() {
                return Err(Error::NonFinite(format!(
                    "parameter {} after optimizer step {}",
                    params.name(id),
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

/// Global L2 norm over every gradient tensor.
pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping. A zero norm is left untouched.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

/// An augmented training example with its edge-pyramid targets.
pub struct Prepared {
    pub sample: Sample,
    pub edges: Vec<Tensor>,
}

/// Effective augmentation scale range: scales below `out / src` would leave
/// the crop window larger than the rescaled image, so the lower bound is
/// raised to that ratio.
pub fn feasible_scale_range(src: (usize, usize), out: (usize, usize)) -> (f64, f64) {
    let min_ratio = (out.0 as f64 / src.0 as f64).max(out.1 as f64 / src.1 as f64);
    let (lo, hi) = DEFAULT_SCALE_RANGE;
    let lo = lo.max(min_ratio);
    (lo, hi.max(lo))
}

pub fn prepare(sample: &Sample, config: &ModelConfig, augment: Option<&mut SplitMix64>) -> Result<Prepared> {
    let sample = match augment {
        Some(rng) => {
            let range = feasible_scale_range(sample.image.dims(), config.image_size);
            augment_crop_scale(sample, rng, config.image_size, range)?
        }
        None => sample.clone(),
    };
    let edges = build_edge_pyramid(&sobel_edge(&sample.image), &config.scale_dims())?
        .iter()
        .map(|e| e.to_tensor())
        .collect();
    Ok(Prepared { sample, edges })
}

/// Mean loss and mean gradients over a batch, without updating anything.
pub fn batch_gradients(
    model: &Model,
    batch: &[Prepared],
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Tensor>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let inv = 1.0 / batch.len() as f64;
    let mut mean = LossBreakdown::default();
    let mut grads: Vec<Tensor> = model.params.tensors().iter().map(Tensor::zeros_like).collect();
    for item in batch {
        let graph = Graph::new();
        let p = model.bind(&graph);
        let x = graph.constant(item.sample.image.to_tensor());
        let (_, terms) = model.loss(&x, &p, &item.sample.labels, &item.edges, weights)?;
        let b = terms.breakdown()?;
        if !b.total.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {} on sample {}",
                b.total, item.sample.id
            )));
        }
        graph.backward(terms.total)?;
        for (acc, g) in grads.iter_mut().zip(p.grads(&model.params)) {
            acc.data_mut()
                .iter_mut()
                .zip(g.data())
                .for_each(|(a, &v)| *a += v * inv);
        }
        mean.add_scaled(&b, inv);
    }
    Ok((mean, grads))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    /// Largest absolute gradient entry over the boundary-head parameters.
    pub boundary_grad_max: f64,
}

/// Ids of the per-level boundary readout parameters.
pub fn boundary_head_ids(model: &Model) -> Vec<ParamId> {
    let head = &model.befbm.boundary;
    head.kernels.iter().chain(&head.biases).copied().collect()
}

/// One optimizer step on a prepared batch.
pub fn train_step(
    model: &mut Model,
    adam: &mut Adam,
    batch: &[Prepared],
    config: &TrainConfig,
    lr: f64,
) -> Result<StepReport> {
    let (loss, mut grads) = batch_gradients(model, batch, &config.weights)?;
    let boundary_grad_max = boundary_head_ids(model)
        .iter()
        .flat_map(|id| grads[id.index()].data().iter().map(|g| g.abs()))
        .fold(0.0, f64::max);
    let grad_norm = match config.grad_clip {
        Some(c) => clip_global_norm(&mut grads, c),
        None => global_norm(&grads),
    };
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite(format!(
            "gradient norm at optimizer step {}",
            adam.steps + 1
        )));
    }
    adam.step(&mut model.params, &grads, lr)?;
    Ok(StepReport {
        loss,
        grad_norm,
        boundary_grad_max,
    })
}

/// Predicts every sample and accumulates confusion and boundary counts.
pub fn evaluate(model: &Model, samples: &[Sample]) -> Result<Evaluator> {
    let mut eval = Evaluator::new(model.config.num_classes, BOUNDARY_TOLERANCE);
    for s in samples {
        let pred = model.predict(&s.image)?;
        eval.add(&pred.labels, &s.labels)?;
    }
    Ok(eval)
}

/// Evaluation report without a throughput figure.
pub fn evaluate_report(model: &Model, samples: &[Sample]) -> Result<MetricsReport> {
    evaluate(model, samples)?.report(&class_names(model.config.num_classes), 0.0)
}

pub fn class_names(num_classes: usize) -> Vec<&'static str> {
    CLASS_NAMES.iter().copied().take(num_classes).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: LossBreakdown,
    pub val: Option<ValRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub miou: f64,
    pub mdice: f64,
    pub mrecall: f64,
    pub boundary_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub steps: usize,
    pub best_epoch: Option<usize>,
    pub best_val_miou: Option<f64>,
    pub final_val: Option<ValRecord>,
    /// Largest boundary-head gradient entry seen over the whole run.
    pub boundary_grad_max: f64,
}

impl TrainSummary {
    pub fn first_epoch_loss(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.mean_loss.total)
    }

    pub fn final_epoch_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.mean_loss.total)
    }
}

/// Where `run_training` writes its artifacts.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn loss_csv(&self) -> PathBuf {
        self.dir.join("loss.csv")
    }
    pub fn val_csv(&self) -> PathBuf {
        self.dir.join("val.csv")
    }
    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("final.ckpt")
    }
    pub fn best_checkpoint(&self) -> PathBuf {
        self.dir.join("best.ckpt")
    }
    pub fn summary(&self) -> PathBuf {
        self.dir.join("summary.json")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Formats one CSV row of the loss log. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn loss_row(epoch: usize, step: usize, b: &LossBreakdown) -> String {
    format!("{epoch},{step},{},{},{},{}", b.total, b.cls, b.mask, b.edge)
}

/// Trains a fresh model on `dataset.train`, validating on `dataset.val`
/// after each epoch when enabled. With `out` set, writes the loss and
/// validation CSVs, the final and best checkpoints and a JSON summary.
pub fn run_training(
    model_config: &ModelConfig,
    config: &TrainConfig,
    dataset: &Dataset,
    out: Option<&OutputPaths>,
) -> Result<(Model, TrainSummary)> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let root = SplitMix64::new(config.seed);
    let mut model = Model::new(model_config.clone(), config.seed)?;
    let mut adam = Adam::new(&model.params);
    let mut order_rng = root.fork(101);
    let mut augment_rng = root.fork(102);
    if let Some(o) = out {
        fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
    }

    let mut loss_csv = format!("{LOSS_CSV_HEADER}\n");
    let mut val_csv = format!("{VAL_CSV_HEADER}\n");
    let mut summary = TrainSummary {
        seed: config.seed,
        epochs: Vec::new(),
        steps: 0,
        best_epoch: None,
        best_val_miou: None,
        final_val: None,
        boundary_grad_max: 0.0,
    };
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    for epoch in 1..=config.epochs {
        order_rng.shuffle(&mut order);
        let lr = config.lr_at(epoch);
        let mut epoch_sum = LossBreakdown::default();
        let mut epoch_steps = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let rng = config.augment.then_some(&mut augment_rng);
                    prepare(&dataset.train[i], model_config, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let report = train_step(&mut model, &mut adam, &batch, config, lr).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg} (epoch {epoch}, step {})", summary.steps + 1)),
                other => other,
            })?;
            summary.steps += 1;
            epoch_steps += 1;
            summary.boundary_grad_max = summary.boundary_grad_max.max(report.boundary_grad_max);
            epoch_sum.add_scaled(&report.loss, 1.0);
            let _ = writeln!(loss_csv, "{}", loss_row(epoch, summary.steps, &report.loss));
        }
        let mut mean_loss = LossBreakdown::default();
        mean_loss.add_scaled(&epoch_sum, 1.0 / epoch_steps as f64);

        let val = if config.validate && !dataset.val.is_empty() {
            let r = evaluate_report(&model, &dataset.val)?;
            let v = ValRecord {
                miou: r.miou,
                mdice: r.mdice,
                mrecall: r.mrecall,
                boundary_f1: r.boundary_f1,
            };
            let _ = writeln!(
                val_csv,
                "{epoch},{},{},{},{}",
                v.miou, v.mdice, v.mrecall, v.boundary_f1
            );
            if summary.best_val_miou.is_none_or(|best| v.miou > best) {
                summary.best_val_miou = Some(v.miou);
                summary.best_epoch = Some(epoch);
                if let Some(o) = out {
                    model.save(o.best_checkpoint())?;
                }
            }
            summary.final_val = Some(v);
            Some(v)
        } else {
            None
        };
        summary.epochs.push(EpochRecord { epoch, mean_loss, val });
    }

    if let Some(o) = out {
        write_file(&o.loss_csv(), &loss_csv)?;
        if config.validate {
            write_file(&o.val_csv(), &val_csv)?;
        }
        model.save(o.final_checkpoint())?;
        write_file(&o.summary(), &serde_json::to_string_pretty(&summary)?)?;
    }
    Ok((model, summary))
}

/// Middle value of the sorted inputs (mean of the two middle values for
/// even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub miou: f64,
    pub boundary_f1: f64,
    pub boundary_grad_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub lambda3: f64,
    /// Medians over seeds.
    pub miou: f64,
    pub boundary_f1: f64,
    pub runs: Vec<SeedResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub arms: Vec<ArmReport>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Median boundary F1 of the last arm is at least that of the first.
    pub expectation_met: bool,
    /// Every `λ₃ = 0` arm saw exactly zero boundary-head gradients.
    pub zero_lambda_boundary_grads_zero: bool,
}

/// Trains one model per `(λ₃, seed)` with otherwise identical schedules
/// and compares validation mIoU and boundary F1.
pub fn run_ablation(
    model_config: &ModelConfig,
    config: &TrainConfig,
    dataset: &Dataset,
    lambdas: &[f64],
    seeds: &[u64],
) -> Result<AblationReport> {
    if lambdas.len() < 2 || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "ablation needs two or more arms and one or more seeds".into(),
        ));
    }
    let mut arms = Vec::new();
    for &lambda3 in lambdas {
        let mut runs = Vec::new();
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                validate: false,
                weights: LossWeights {
                    lambda3,
                    ..config.weights
                },
                ..config.clone()
            };
            let (model, summary) = run_training(model_config, &cfg, dataset, None)?;
            let r = evaluate_report(&model, &dataset.val)?;
            runs.push(SeedResult {
                seed,
                miou: r.miou,
                boundary_f1: r.boundary_f1,
                boundary_grad_max: summary.boundary_grad_max,
            });
        }
        let miou = median(&runs.iter().map(|r| r.miou).collect::<Vec<_>>());
        let boundary_f1 = median(&runs.iter().map(|r| r.boundary_f1).collect::<Vec<_>>());
        arms.push(ArmReport {
            lambda3,
            miou,
            boundary_f1,
            runs,
        });
    }
    let expectation_met = arms.last().map(|a| a.boundary_f1) >= arms.first().map(|a| a.boundary_f1);
    let zero_lambda_boundary_grads_zero = arms
        .iter()
        .filter(|a| a.lambda3 == 0.0)
        .flat_map(|a| &a.runs)
        .all(|r| r.boundary_grad_max == 0.0);
    Ok(AblationReport {
        arms,
        seeds: seeds.to_vec(),
        epochs: config.epochs,
        expectation_met,
        zero_lambda_boundary_grads_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetConfig, SceneSpec, Split};

    fn tiny4() -> ModelConfig {
        ModelConfig {
            num_classes: 4,
            ..ModelConfig::tiny()
        }
    }

    fn tiny_data(train: usize) -> Dataset {
        let cfg = DatasetConfig {
            seed: 3,
            train,
            val: 2,
            test: 1,
            scene: SceneSpec {
                height: 16,
                width: 16,
                ..Default::default()
            },
        };
        cfg.generate().unwrap()
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let data = tiny_data(2);
        let mut model = Model::new(tiny4(), 1).unwrap();
        let before = model.params.clone();
        let mut adam = Adam::new(&model.params);
        let cfg = TrainConfig {
            weights: LossWeights::new(0.0, 0.0, 0.0).unwrap(),
            ..Default::default()
        };
        let batch: Vec<_> = data
            .train
            .iter()
            .map(|s| prepare(s, &model.config, None).unwrap())
            .collect();
        let r = train_step(&mut model, &mut adam, &batch, &cfg, 1e-3).unwrap();
        assert_eq!(r.grad_norm, 0.0);
        assert_eq!(model.params, before);
    }

    #[test]
    fn batch_of_one_matches_single_sample() {
        let data = tiny_data(1);
        let model = Model::new(tiny4(), 2).unwrap();
        let p = prepare(&data.train[0], &model.config, None).unwrap();
        let w = LossWeights::default();
        let (a, ga) = batch_gradients(&model, std::slice::from_ref(&p), &w).unwrap();
        let graph = Graph::new();
        let bound = model.bind(&graph);
        let x = graph.constant(p.sample.image.to_tensor());
        let (_, terms) = model.loss(&x, &bound, &p.sample.labels, &p.edges, &w).unwrap();
        assert_eq!(a.total, terms.total.item().unwrap());
        graph.backward(terms.total).unwrap();
        assert_eq!(ga, bound.grads(&model.params));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Tensor::full([4], 10.0)];
        let before = clip_global_norm(&mut g, 1.0);
        assert_eq!(before, 20.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-12);
        let mut zero = vec![Tensor::zeros([3])];
        assert_eq!(clip_global_norm(&mut zero, 1.0), 0.0);
        assert_eq!(zero[0].data(), &[0.0; 3]);
    }

    #[test]
    fn median_by_sorting() {
        assert_eq!(median(&[0.3, 0.1, 0.2]), 0.2);
        assert_eq!(median(&[0.9, 0.5, 0.7]), 0.7);
        assert_eq!(median(&[1.0, 3.0]), 2.0);
    }

    #[test]
    fn lr_decay_schedule() {
        let cfg = TrainConfig {
            lr: 1.0,
            lr_decay: Some(LrDecay {
                every_epochs: 2,
                gamma: 0.5,
            }),
            ..Default::default()
        };
        let lrs: Vec<_> = (1..=5).map(|e| cfg.lr_at(e)).collect();
        assert_eq!(lrs, [1.0, 1.0, 0.5, 0.5, 0.25]);
        assert_eq!(cfg.lr_at(0), 1.0);
    }

    #[test]
    fn training_writes_artifacts_and_is_deterministic() {
        let data = tiny_data(5);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let out = OutputPaths::new(dir.path().join("run"));
        let (_, summary) = run_training(&tiny4(), &cfg, &data, Some(&out)).unwrap();
        assert_eq!(summary.steps, 6);
        let csv = fs::read_to_string(out.loss_csv()).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert_eq!(csv.lines().next(), Some(LOSS_CSV_HEADER));
        assert!(out.final_checkpoint().exists() && out.best_checkpoint().exists());

        let out2 = OutputPaths::new(dir.path().join("run2"));
        run_training(&tiny4(), &cfg, &data, Some(&out2)).unwrap();
        assert_eq!(csv, fs::read_to_string(out2.loss_csv()).unwrap());
    }

    #[test]
    fn augmentation_range_respects_crop() {
        assert_eq!(feasible_scale_range((64, 64), (64, 64)), (1.0, 1.25));
        assert_eq!(feasible_scale_range((128, 128), (64, 64)), DEFAULT_SCALE_RANGE);
        let data = tiny_data(1);
        let mut rng = SplitMix64::new(1);
        let p = prepare(&data.train[0], &tiny4(), Some(&mut rng)).unwrap();
        assert_eq!(p.sample.image.dims(), (16, 16));
        assert_eq!(p.edges.len(), 2);
        let _ = Split::Train;
    }
}
