//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 4`.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use boundary_seg::backbone::{encode_scale, extract_features};
use boundary_seg::befbm::{bridge_pair, gate_alpha};
use boundary_seg::data::{generate_dataset, DatasetConfig};
use boundary_seg::decoder::decode_step;
use boundary_seg::imaging::{sobel_edge, sobel_kernels, Image, LabelMap};
use boundary_seg::metrics::{majority_baseline_miou, ConfusionAccumulator};
use boundary_seg::rng::SplitMix64;
use boundary_seg::tensor::Resample;
use boundary_seg::training::{
    evaluate_report, prepare, run_ablation, run_training, train_step, Adam, OutputPaths, TrainConfig,
};
use boundary_seg::{Graph, Model, ModelConfig, Tensor, Var};
use common::{
    brute_counts, brute_scores, central_difference_error, conv_padded, random_image, random_labels, Objective,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

type UnaryCase = (&'static str, Vec<Vec<usize>>, for<'a, 'g> fn(&'a [Var<'g>]) -> Var<'g>);

fn op_cases() -> Vec<UnaryCase> {
    vec![
        ("add", vec![vec![2, 3], vec![2, 3]], |v| v[0].add(&v[1]).unwrap()),
        ("sub", vec![vec![2, 3], vec![2, 3]], |v| v[0].sub(&v[1]).unwrap()),
        ("mul", vec![vec![2, 3], vec![2, 3]], |v| v[0].mul(&v[1]).unwrap()),
        ("div", vec![vec![2, 3], vec![2, 3]], |v| {
            v[0].div(&v[1].square().add_scalar(0.5)).unwrap()
        }),
        ("scale_by", vec![vec![2, 3], vec![1]], |v| v[0].scale_by(&v[1]).unwrap()),
        ("lerp", vec![vec![2, 2, 2], vec![2, 2, 2], vec![1]], |v| {
            v[0].lerp(&v[1], &v[2].sigmoid()).unwrap()
        }),
        ("matmul", vec![vec![2, 3], vec![3, 4]], |v| v[0].matmul(&v[1]).unwrap()),
        ("transpose", vec![vec![2, 3]], |v| v[0].transpose().unwrap()),
        ("conv2d", vec![vec![2, 5, 4], vec![3, 2, 3, 3]], |v| {
            v[0].conv2d(&v[1], 1).unwrap()
        }),
        ("conv2d_stride2", vec![vec![2, 5, 6], vec![2, 2, 3, 3]], |v| {
            v[0].conv2d(&v[1], 2).unwrap()
        }),
        ("channel_bias", vec![vec![2, 3, 3], vec![2]], |v| {
            v[0].add_channel_bias(&v[1]).unwrap()
        }),
        ("row_bias", vec![vec![3, 2], vec![2]], |v| {
            v[0].add_row_bias(&v[1]).unwrap()
        }),
        ("sigmoid", vec![vec![2, 3]], |v| v[0].sigmoid()),
        ("silu", vec![vec![2, 3]], |v| v[0].silu()),
        ("softmax", vec![vec![2, 4]], |v| v[0].softmax()),
        ("log", vec![vec![2, 3]], |v| v[0].sigmoid().log_clamped(1e-12)),
        ("mean", vec![vec![2, 3]], |v| v[0].mean()),
        ("sum_last_axis", vec![vec![2, 3]], |v| v[0].sum_last_axis().unwrap()),
        ("gap", vec![vec![2, 2, 3]], |v| v[0].global_avg_pool().unwrap()),
        ("upsample", vec![vec![1, 2, 3]], |v| {
            v[0].resample(Resample::UpsampleNearest2x).unwrap()
        }),
        ("avgpool", vec![vec![2, 4, 2]], |v| {
            v[0].resample(Resample::AvgPool2x).unwrap()
        }),
        ("maxpool", vec![vec![2, 4, 2]], |v| {
            v[0].resample(Resample::MaxPool2x).unwrap()
        }),
        ("gather", vec![vec![5]], |v| v[0].gather(&[4, 1, 1]).unwrap()),
    ]
}

fn reduce<'g>(g: &'g Graph, out: Var<'g>, weights: &Tensor) -> Var<'g> {
    out.reshape([weights.len()])
        .unwrap()
        .mul(&g.constant(weights.clone()))
        .unwrap()
        .sum()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_op: f64 = 0.0;
    for (i, (name, shapes, op)) in op_cases().into_iter().enumerate() {
        let mut rng = SplitMix64::new(500 + i as u64);
        let inputs: Vec<Tensor> = shapes
            .iter()
            .map(|s| Tensor::uniform(s.clone(), 1.0, &mut rng))
            .collect();
        let out_len = {
            let g = Graph::new();
            let v: Vec<_> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
            op(&v).value().len()
        };
        let weights = Tensor::uniform([out_len], 1.0, &mut rng);
        let value = |xs: &[Tensor]| {
            let g = Graph::new();
            let v: Vec<_> = xs.iter().map(|t| g.leaf(t.clone())).collect();
            reduce(&g, op(&v), &weights).item().unwrap()
        };
        let g = Graph::new();
        let v: Vec<_> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = reduce(&g, op(&v), &weights);
        g.backward(loss).unwrap();
        let analytic: Vec<Tensor> = v
            .iter()
            .zip(&inputs)
            .map(|(x, t)| x.grad().unwrap_or_else(|| Tensor::zeros_like(t)))
            .collect();
        let err = central_difference_error(value, &inputs, &analytic, 1e-5);
        ensure(err < 1e-4, format!("op {name}: relative error {err:.3e}"))?;
        worst_op = worst_op.max(err);
    }
    let mut worst_full: f64 = 0.0;
    let mut coords = 0;
    for seed in 0..5 {
        let obj = Objective::new(Model::new(ModelConfig::tiny(), seed).unwrap(), 1000 + seed);
        let inputs = obj.inputs();
        coords = inputs.iter().map(Tensor::len).sum();
        let (_, analytic) = obj.eval(&inputs, true);
        let err = central_difference_error(|xs| obj.eval(xs, false).0, &inputs, &analytic, 1e-5);
        ensure(
            err < 1e-4,
            format!("composite loss seed {seed}: relative error {err:.3e}"),
        )?;
        worst_full = worst_full.max(err);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} ops max rel err {worst_op:.2e}; composite loss (16x16, L=2, C=3, K=3, T=1) over {coords} coords x 5 seeds max rel err {worst_full:.2e}",
        op_cases().len()
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(2);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let c_in = rng.range_inclusive(1, 3);
        let (h, w) = (rng.range_inclusive(1, 16), rng.range_inclusive(1, 16));
        let input = Tensor::uniform([c_in, h, w], 2.0, &mut rng);
        let kernel = if case < 5 {
            let s = sobel_kernels();
            Tensor::from_fn([2, c_in, 3, 3], |i| s.data()[(i / (9 * c_in)) * 9 + i % 9])
        } else {
            Tensor::uniform([rng.range_inclusive(1, 3), c_in, 3, 3], 2.0, &mut rng)
        };
        let stride = if case % 3 == 2 { 2 } else { 1 };
        let g = Graph::new();
        let fast = g
            .leaf(input.clone())
            .conv2d(&g.leaf(kernel.clone()), stride)
            .unwrap()
            .value();
        worst = worst.max(fast.max_abs_diff(&conv_padded(&input, &kernel, stride)));
    }
    ensure(worst <= 1e-12, format!("max abs diff {worst:.3e}"))?;
    Ok(format!("20 random cases incl. Sobel kernels, max abs diff {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let constant = Image::filled(16, 16, [0.2, 0.5, 0.7]).unwrap();
    ensure(
        sobel_edge(&constant).values().iter().all(|&v| v == 0.0),
        "constant image has nonzero edges",
    )?;
    let step = |vertical: bool| {
        let mut img = Image::filled(16, 16, [0.0; 3]).unwrap();
        for ch in 0..3 {
            for r in 0..16 {
                for c in 0..16 {
                    let on = if vertical { c >= 8 } else { r >= 8 };
                    img.set(ch, r, c, if on { 1.0 } else { 0.0 });
                }
            }
        }
        sobel_edge(&img)
    };
    let (v, hz) = (step(true), step(false));
    let expected = 4.0 / (4.0 * 2f64.sqrt());
    for r in 1..15 {
        for c in [7, 8] {
            ensure(
                (v.get(r, c) - expected).abs() <= 1e-12,
                format!("vertical step at ({r},{c}) = {}", v.get(r, c)),
            )?;
        }
        ensure(
            v.get(r, 3) == 0.0 && v.get(r, 12) == 0.0,
            "edge response away from the step",
        )?;
    }
    for r in 0..16 {
        for c in 0..16 {
            ensure(
                v.get(r, c) == hz.get(c, r),
                format!("horizontal step not the transpose at ({r},{c})"),
            )?;
        }
    }
    Ok(format!(
        "constant -> 0 exactly; vertical step -> {expected:.12}; horizontal step is the exact transpose"
    ))
}

fn criterion_4() -> Outcome {
    let pred = LabelMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
    let gt = LabelMap::new(2, 2, vec![0, 1, 0, 1]).unwrap();
    let mut acc = ConfusionAccumulator::new(2);
    acc.accumulate(&pred, &gt).unwrap();
    let r = acc.report().unwrap();
    ensure(
        (r.miou - 1.0 / 3.0).abs() <= 1e-12 && (r.mdice - 0.5).abs() <= 1e-12 && (r.mrecall - 0.5).abs() <= 1e-12,
        format!("hand case gave {:?}", (r.miou, r.mdice, r.mrecall)),
    )?;
    let mut rng = SplitMix64::new(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let pred = random_labels(&mut rng, 8, 8, 4);
        let gt = random_labels(&mut rng, 8, 8, 4);
        let mut acc = ConfusionAccumulator::new(4);
        acc.accumulate(&pred, &gt).unwrap();
        for (c, (tp, fp, fn_)) in brute_counts(&pred, &gt, 4).into_iter().enumerate() {
            ensure(
                (acc.tp[c], acc.fp[c], acc.fn_[c]) == (tp, fp, fn_),
                format!("counts differ for class {c}"),
            )?;
        }
        let r = acc.report().unwrap();
        let (i, d, rc) = brute_scores(&pred, &gt, 4);
        worst = worst
            .max((r.miou - i).abs())
            .max((r.mdice - d).abs())
            .max((r.mrecall - rc).abs());
        for s in &r.per_class {
            if let (Some(dice), Some(iou)) = (s.dice, s.iou) {
                ensure(dice >= iou, "Dice < IoU")?;
            }
        }
    }
    ensure(worst <= 1e-12, format!("max diff {worst:.3e}"))?;
    Ok(format!(
        "2x2 hand case exact; 50 random 8x8 pairs max diff {worst:.2e}; Dice >= IoU everywhere"
    ))
}

fn criterion_5() -> Outcome {
    let g = Graph::new();
    let mut rng = SplitMix64::new(5);
    let zi = g.leaf(Tensor::uniform([8, 8, 8], 3.0, &mut rng));
    let zj = g.leaf(Tensor::uniform([8, 4, 4], 3.0, &mut rng));
    let zero = g.leaf(Tensor::zeros([8]));
    let a = gate_alpha(&zi, &zj, &zero, &zero).unwrap().item().unwrap();
    ensure(a == 0.5, format!("alpha at zero weights = {a}"))?;
    for bound in [0.1, 1.0, 10.0, 1e3, 1e6] {
        for _ in 0..10 {
            let w1 = g.leaf(Tensor::uniform([8], bound, &mut rng));
            let w2 = g.leaf(Tensor::uniform([8], bound, &mut rng));
            let a = gate_alpha(&zi, &zj, &w1, &w2).unwrap().item().unwrap();
            ensure(a > 0.0 && a < 1.0, format!("alpha {a} outside (0,1)"))?;
        }
    }
    let up = zj.resample(Resample::UpsampleNearest2x).unwrap().value();
    let at = |alpha: f64| {
        bridge_pair(&zi, &zj, &g.constant(Tensor::scalar(alpha)))
            .unwrap()
            .value()
    };
    ensure(at(1.0) == zi.value(), "alpha = 1 does not reproduce Z_i")?;
    ensure(at(0.0) == up, "alpha = 0 does not reproduce upsampled Z_j")?;
    for _ in 0..50 {
        let f = at(rng.next_f64());
        let inside = f
            .data()
            .iter()
            .zip(zi.value().data())
            .zip(up.data())
            .all(|((&v, &x), &y)| v >= x.min(y) && v <= x.max(y));
        ensure(inside, "fused value outside its inputs")?;
    }
    Ok("alpha = 0.5 exactly at zero weights; alpha in (0,1) for weights up to 1e6; endpoints exact; fused values bounded".into())
}

fn criterion_6() -> Outcome {
    let mut model = Model::new(ModelConfig::default(), 6).unwrap();
    model.params.zero_prefix("encoder.");
    model.params.zero_prefix("decoder.round");
    let g = Graph::new();
    let p = model.bind(&g);
    let mut rng = SplitMix64::new(6);
    let img = g.constant(random_image(&mut rng, 64, 64).to_tensor());
    let feats = extract_features(&img, &model.backbone, &p).unwrap();
    for (l, (f, block)) in feats.levels.iter().zip(&model.encoders).enumerate() {
        ensure(
            encode_scale(f, block, &p).unwrap().value() == f.value(),
            format!("encoder level {} not identity", l + 1),
        )?;
    }
    let q = g.leaf(Tensor::uniform([4, 32], 2.0, &mut rng));
    let z = g.leaf(Tensor::uniform([256, 32], 2.0, &mut rng));
    for (t, round) in model.decoder.rounds.iter().enumerate() {
        ensure(
            decode_step(&q, &z, round, &p).unwrap().value() == q.value(),
            format!("decoder round {} not identity", t + 1),
        )?;
    }
    Ok("encode_scale (3 scales) and decode_step (2 rounds) are exact identities with zeroed weights".into())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let data = DatasetConfig::default();
    let mut model = Model::new(ModelConfig::default(), 7).unwrap();
    let batch: Vec<_> = (0..8)
        .map(|i| {
            prepare(
                &data.sample(boundary_seg::data::Split::Train, i).unwrap(),
                &model.config,
                None,
            )
            .unwrap()
        })
        .collect();
    let cfg = TrainConfig::default();
    let mut adam = Adam::new(&model.params);
    let mut losses = vec![];
    for _ in 0..50 {
        losses.push(
            train_step(&mut model, &mut adam, &batch, &cfg, cfg.lr)
                .unwrap()
                .loss
                .total,
        );
    }
    let (first, last) = (losses[0], losses[49]);
    let elapsed = start.elapsed();
    ensure(
        last < first,
        format!("step 50 loss {last} not below step 1 loss {first}"),
    )?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "step 1 loss {first:.4} -> step 50 loss {last:.4} in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let data = DatasetConfig::default().generate().unwrap();
    let (model, summary) = run_training(&ModelConfig::default(), &TrainConfig::default(), &data, None).unwrap();
    let (first, last) = (summary.first_epoch_loss(), summary.final_epoch_loss());
    let val = evaluate_report(&model, &data.val).unwrap().miou;
    let gts: Vec<LabelMap> = data.val.iter().map(|s| s.labels.clone()).collect();
    let baseline = majority_baseline_miou(&gts, 4).unwrap();
    let elapsed = start.elapsed();
    ensure(
        last < 0.5 * first,
        format!("final epoch loss {last} not below half of first {first}"),
    )?;
    ensure(
        val > baseline,
        format!("val mIoU {val} does not beat baseline {baseline}"),
    )?;
    Ok(format!(
        "epoch 1 loss {first:.4} -> epoch 30 loss {last:.4} (ratio {:.3}); val mIoU {val:.4} vs majority baseline {baseline:.4}; {:.0}s",
        last / first,
        elapsed.as_secs_f64()
    ))
}

fn ablation_epochs() -> usize {
    std::env::var("ACCEPTANCE_ABLATION_EPOCHS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10)
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let data = DatasetConfig::default().generate().unwrap();
    let cfg = TrainConfig {
        epochs: ablation_epochs(),
        ..TrainConfig::default()
    };
    let seeds = [0, 1, 2];
    let report = run_ablation(&ModelConfig::default(), &cfg, &data, &[0.0, 0.1], &seeds).unwrap();
    ensure(report.arms.len() == 2, "expected two arms")?;
    ensure(report.seeds == seeds, "seed list mismatch")?;
    for arm in &report.arms {
        let arm_seeds: Vec<u64> = arm.runs.iter().map(|r| r.seed).collect();
        ensure(arm_seeds == seeds, "arms trained on different seeds")?;
        let mut f1: Vec<f64> = arm.runs.iter().map(|r| r.boundary_f1).collect();
        f1.sort_by(f64::total_cmp);
        ensure(arm.boundary_f1 == f1[1], "median is not the middle sorted value")?;
    }
    ensure(
        report.zero_lambda_boundary_grads_zero,
        "boundary head received gradient with lambda3 = 0",
    )?;
    ensure(
        report.arms[0].runs.iter().all(|r| r.boundary_grad_max == 0.0),
        "nonzero boundary gradient in lambda3 = 0 arm",
    )?;
    ensure(
        report.arms[1].runs.iter().all(|r| r.boundary_grad_max > 0.0),
        "lambda3 = 0.1 arm never trained its boundary head",
    )?;
    let json = serde_json::to_value(&report).unwrap();
    ensure(
        json["arms"][0]["lambda3"].is_number() && json["expectation_met"].is_boolean(),
        "report JSON shape",
    )?;
    Ok(format!(
        "{} epochs x 3 seeds per arm; boundary grads with lambda3=0 exactly zero; median boundary F1 {:.4} (lambda3=0) vs {:.4} (lambda3=0.1); expectation_met={} (soft); {:.0}s",
        cfg.epochs,
        report.arms[0].boundary_f1,
        report.arms[1].boundary_f1,
        report.expectation_met,
        start.elapsed().as_secs_f64()
    ))
}

fn files_identical(a: &Path, b: &Path) -> Result<usize, String> {
    let mut count = 0;
    for entry in walk(a) {
        let rel = entry.strip_prefix(a).unwrap();
        let (x, y) = (
            fs::read(&entry).unwrap(),
            fs::read(b.join(rel)).map_err(|e| e.to_string())?,
        );
        ensure(x == y, format!("{} differs", rel.display()))?;
        count += 1;
    }
    ensure(count == walk(b).len(), "different file sets")?;
    Ok(count)
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = vec![];
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data_cfg = DatasetConfig {
        train: 16,
        val: 6,
        test: 2,
        ..DatasetConfig::default()
    };
    let data = data_cfg.generate().unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        seed: 10,
        ..TrainConfig::default()
    };
    let runs: Vec<OutputPaths> = ["a", "b"]
        .iter()
        .map(|n| OutputPaths::new(tmp.path().join(n)))
        .collect();
    let mut summaries = vec![];
    for out in &runs {
        summaries.push(run_training(&ModelConfig::default(), &cfg, &data, Some(out)).unwrap().1);
    }
    let (csv_a, csv_b) = (
        fs::read(runs[0].loss_csv()).unwrap(),
        fs::read(runs[1].loss_csv()).unwrap(),
    );
    ensure(csv_a == csv_b, "loss CSVs differ between identical runs")?;
    ensure(
        fs::read(runs[0].final_checkpoint()).unwrap() == fs::read(runs[1].final_checkpoint()).unwrap(),
        "checkpoints differ",
    )?;

    let logged = summaries[0].final_val.unwrap().miou;
    let mut reloaded = Model::new(ModelConfig::default(), 999).unwrap();
    reloaded.load(runs[0].final_checkpoint()).unwrap();
    let again = evaluate_report(&reloaded, &data.val).unwrap().miou;
    ensure(
        (logged - again).abs() <= 1e-12,
        format!("reloaded mIoU {again} vs logged {logged}"),
    )?;

    let full = DatasetConfig::default();
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    generate_dataset(&full, &d1).unwrap();
    generate_dataset(&full, &d2).unwrap();
    let n = files_identical(&d1, &d2)?;
    ensure(n == 2 * 300 + 1, format!("expected 601 files, found {n}"))?;
    Ok(format!(
        "loss CSVs ({} bytes) and checkpoints bit-identical; reloaded val mIoU diff {:.1e}; {n} dataset files byte-identical",
        csv_a.len(),
        (logged - again).abs()
    ))
}

fn criterion_11() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_bseg"))
        .args(["bench"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("bench exited with {}", out.status))?;
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let fps = json["fps"].as_f64().unwrap_or(0.0);
    ensure(fps > 0.0, "fps not positive")?;
    ensure(json["element_type"] == "f64", "missing element type")?;
    ensure(
        json["height"] == 64 && json["width"] == 64 && json["batch_size"] == 1,
        "missing size metadata",
    )?;
    ensure(json["warmup"] == 5 && json["timed"] == 50, "wrong invocation counts")?;
    Ok(format!("{fps:.1} images/s, f64, 64x64, batch 1"))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "gradient fidelity", criterion_1),
        (2, "convolution oracle", criterion_2),
        (3, "Sobel analytics", criterion_3),
        (4, "metric oracle", criterion_4),
        (5, "gate and bridge invariants", criterion_5),
        (6, "residual identities", criterion_6),
        (7, "overfit smoke test", criterion_7),
        (8, "end-to-end convergence", criterion_8),
        (9, "ablation harness", criterion_9),
        (10, "determinism and persistence", criterion_10),
        (11, "FPS bench", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}) [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}) [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
