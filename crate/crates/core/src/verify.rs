//! Self-contained verification suite: finite-difference gradient checks of
//! every operation and of the full training objective, plus brute-force
//! oracles for convolution, Sobel edges, metrics and the bridging module.
//! The command line `verify` subcommand runs [`run_all`].

use serde::Serialize;

use crate::backbone::{encode_scale, EncoderBlock};
use crate::befbm::{bridge_pair, gate_alpha};
use crate::decoder::{decode_step, Decoder, DecoderConfig};
use crate::error::Result;
use crate::imaging::{build_edge_pyramid, sobel_edge, sobel_kernels, Image, LabelMap, EDGE_NORMALIZER};
use crate::losses::LossWeights;
use crate::metrics::ConfusionAccumulator;
use crate::model::{Model, ModelConfig};
use crate::params::{Bound, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{grad_check_many, Graph, Resample, Tensor, Var, DEFAULT_STEP};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type OpCase = (
    &'static str,
    Vec<Vec<usize>>,
    for<'a, 'g> fn(&'a [Var<'g>]) -> Result<Var<'g>>,
);

fn op_cases() -> Vec<OpCase> {
    vec![
        ("add", vec![vec![3, 4], vec![3, 4]], |v| v[0].add(&v[1])),
        ("sub", vec![vec![3, 4], vec![3, 4]], |v| v[0].sub(&v[1])),
        ("mul", vec![vec![3, 4], vec![3, 4]], |v| v[0].mul(&v[1])),
        ("div", vec![vec![3, 4], vec![3, 4]], |v| {
            v[0].div(&v[1].square().add_scalar(1.0))
        }),
        ("scale_by", vec![vec![3, 4], vec![1]], |v| v[0].scale_by(&v[1])),
        ("lerp", vec![vec![2, 3, 3], vec![2, 3, 3], vec![1]], |v| {
            v[0].lerp(&v[1], &v[2].sigmoid())
        }),
        ("matmul", vec![vec![3, 4], vec![4, 2]], |v| v[0].matmul(&v[1])),
        ("transpose", vec![vec![3, 4]], |v| v[0].transpose()),
        ("reshape", vec![vec![3, 4]], |v| v[0].reshape([2, 6])),
        ("conv2d", vec![vec![2, 5, 6], vec![3, 2, 3, 3]], |v| {
            v[0].conv2d(&v[1], 1)
        }),
        ("conv2d_stride2", vec![vec![2, 6, 6], vec![3, 2, 3, 3]], |v| {
            v[0].conv2d(&v[1], 2)
        }),
        ("conv2d_1x1", vec![vec![3, 4, 4], vec![2, 3, 1, 1]], |v| {
            v[0].conv2d(&v[1], 1)
        }),
        ("add_row_bias", vec![vec![3, 4], vec![4]], |v| v[0].add_row_bias(&v[1])),
        ("add_channel_bias", vec![vec![2, 3, 3], vec![2]], |v| {
            v[0].add_channel_bias(&v[1])
        }),
        ("sigmoid", vec![vec![3, 4]], |v| Ok(v[0].sigmoid())),
        ("silu", vec![vec![3, 4]], |v| Ok(v[0].silu())),
        ("softmax", vec![vec![3, 4]], |v| Ok(v[0].softmax())),
        ("log_clamped", vec![vec![3, 4]], |v| {
            Ok(v[0].sigmoid().log_clamped(1e-12))
        }),
        ("mean", vec![vec![3, 4]], |v| Ok(v[0].mean())),
        ("sum_last_axis", vec![vec![3, 4]], |v| v[0].sum_last_axis()),
        ("global_avg_pool", vec![vec![2, 3, 4]], |v| v[0].global_avg_pool()),
        ("upsample2x", vec![vec![2, 2, 3]], |v| {
            v[0].resample(Resample::UpsampleNearest2x)
        }),
        ("avgpool2x", vec![vec![2, 4, 4]], |v| v[0].resample(Resample::AvgPool2x)),
        ("maxpool2x", vec![vec![2, 4, 4]], |v| v[0].resample(Resample::MaxPool2x)),
        ("gather", vec![vec![6]], |v| v[0].gather(&[0, 2, 2, 5])),
    ]
}

/// Gradient check of every differentiable operation, each reduced to a
/// scalar by a dot product with fixed random weights.
pub fn check_op_gradients(seed: u64) -> Vec<Check> {
    op_cases()
        .into_iter()
        .enumerate()
        .map(|(i, (name, shapes, op))| {
            let mut rng = SplitMix64::new(seed).fork(i as u64);
            let inputs: Vec<Tensor> = shapes
                .iter()
                .map(|s| Tensor::uniform(s.clone(), 1.0, &mut rng))
                .collect();
            let probe = {
                let g = Graph::new();
                let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
                op(&vars).map(|v| v.shape())
            };
            let result = probe.and_then(|out_shape| {
                let weights = Tensor::uniform(out_shape, 1.0, &mut rng);
                grad_check_many(
                    |g, vars| {
                        let n = weights.len();
                        let w = g.constant(weights.reshape([n, 1])?);
                        op(vars)?.reshape([1, n])?.matmul(&w)?.reshape([1])
                    },
                    &inputs,
                    DEFAULT_STEP,
                )
            });
            match result {
                Ok(r) => Check::new(
                    &format!("grad:{name}"),
                    r.passes(GRAD_TOLERANCE),
                    format!("max rel error {:.3e}", r.max_rel_error),
                ),
                Err(e) => Check::new(&format!("grad:{name}"), false, e.to_string()),
            }
        })
        .collect()
}

/// Gradient check of the full objective with respect to every parameter
/// and every input pixel of a 16×16, two-scale, three-class model.
pub fn check_composite_gradient(seed: u64) -> Check {
    let run = || -> Result<f64> {
        let cfg = ModelConfig::tiny();
        let model = Model::new(cfg.clone(), seed)?;
        let mut rng = SplitMix64::new(seed).fork(99);
        let (h, w) = cfg.image_size;
        let image = Image::new(h, w, (0..3 * h * w).map(|_| rng.next_f64()).collect())?;
        let labels = (0..h * w)
            .map(|_| rng.range_inclusive(0, cfg.num_classes - 1) as u8)
            .collect();
        let gt = LabelMap::new(h, w, labels)?;
        let edges: Vec<Tensor> = build_edge_pyramid(&sobel_edge(&image), &cfg.scale_dims())?
            .iter()
            .map(|e| e.to_tensor())
            .collect();
        let weights = LossWeights::default();
        let mut inputs = model.params.tensors().to_vec();
        inputs.push(image.to_tensor());
        let report = grad_check_many(
            |_, vars| {
                let (params, x) = vars.split_at(vars.len() - 1);
                let p = Bound::from_vars(params.to_vec());
                Ok(model.loss(&x[0], &p, &gt, &edges, &weights)?.1.total)
            },
            &inputs,
            DEFAULT_STEP,
        )?;
        Ok(report.max_rel_error)
    };
    let name = format!("grad:composite_loss(seed {seed})");
    match run() {
        Ok(err) => Check::new(&name, err < GRAD_TOLERANCE, format!("max rel error {err:.3e}")),
        Err(e) => Check::new(&name, false, e.to_string()),
    }
}

/// Direct nested-loop convolution with replicate padding.
pub fn conv_oracle(input: &Tensor, kernel: &Tensor, stride: usize) -> Tensor {
    let (ci, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (co, kh, kw) = (kernel.shape()[0], kernel.shape()[2], kernel.shape()[3]);
    let (oh, ow) = ((h - 1) / stride + 1, (w - 1) / stride + 1);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    Tensor::from_fn([co, oh, ow], |idx| {
        let (o, y, x) = (idx / (oh * ow), (idx / ow) % oh, idx % ow);
        let mut acc = 0.0;
        for c in 0..ci {
            for ky in 0..kh {
                for kx in 0..kw {
                    let sy = clamp((y * stride + ky) as isize - (kh / 2) as isize, h);
                    let sx = clamp((x * stride + kx) as isize - (kw / 2) as isize, w);
                    acc += kernel.at(&[o, c, ky, kx]) * input.at(&[c, sy, sx]);
                }
            }
        }
        acc
    })
}

pub fn check_conv_oracle(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let c_in = rng.range_inclusive(1, 3);
        let h = rng.range_inclusive(3, 16);
        let w = rng.range_inclusive(3, 16);
        let input = Tensor::uniform([c_in, h, w], 1.0, &mut rng);
        let (kernel, stride) = if case % 4 == 0 {
            let k = sobel_kernels();
            (
                Tensor::from_fn([2, c_in, 3, 3], |i| k.data()[(i / (9 * c_in)) * 9 + i % 9]),
                1,
            )
        } else {
            (
                Tensor::uniform([rng.range_inclusive(1, 3), c_in, 3, 3], 1.0, &mut rng),
                rng.range_inclusive(1, 2),
            )
        };
        let g = Graph::new();
        let fast = g.constant(input.clone()).conv2d(&g.constant(kernel.clone()), stride);
        match fast {
            Ok(v) => worst = worst.max(v.value().max_abs_diff(&conv_oracle(&input, &kernel, stride))),
            Err(e) => return Check::new("oracle:conv2d", false, e.to_string()),
        }
    }
    Check::new(
        "oracle:conv2d",
        worst <= ORACLE_TOLERANCE,
        format!("max abs diff {worst:.3e} over 20 cases"),
    )
}

pub fn check_sobel() -> Check {
    let constant = Image::filled(8, 8, [0.3, 0.6, 0.9]).expect("valid");
    let flat = sobel_edge(&constant).max() == 0.0;
    let step = |vertical: bool| {
        let data = (0..3 * 64)
            .map(|i| {
                let (r, c) = ((i % 64) / 8, i % 8);
                f64::from(u8::from(if vertical { c >= 4 } else { r >= 4 }))
            })
            .collect();
        sobel_edge(&Image::new(8, 8, data).expect("valid"))
    };
    let (v, hz) = (step(true), step(false));
    let expected = 4.0 / EDGE_NORMALIZER;
    let vertical_ok = (0..8).all(|r| (v.get(r, 3) - expected).abs() < ORACLE_TOLERANCE && v.get(r, 0) == 0.0);
    let symmetric = (0..8).all(|r| (0..8).all(|c| v.get(r, c) == hz.get(c, r)));
    Check::new(
        "oracle:sobel",
        flat && vertical_ok && symmetric,
        format!("constant zero {flat}, vertical step {vertical_ok}, transposed symmetry {symmetric}"),
    )
}

/// mIoU, mDice and mRecall from exhaustive per-class pixel enumeration.
pub fn metric_oracle(pred: &LabelMap, gt: &LabelMap, k: usize) -> (f64, f64, f64) {
    let (mut iou, mut dice, mut rec) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..k as u8 {
        let pairs: Vec<(bool, bool)> = pred
            .labels()
            .iter()
            .zip(gt.labels())
            .map(|(&p, &g)| (p == c, g == c))
            .collect();
        let tp = pairs.iter().filter(|&&(p, g)| p && g).count() as f64;
        let fp = pairs.iter().filter(|&&(p, g)| p && !g).count() as f64;
        let fn_ = pairs.iter().filter(|&&(p, g)| !p && g).count() as f64;
        if tp + fp + fn_ > 0.0 {
            iou.push(tp / (tp + fp + fn_));
            dice.push(2.0 * tp / (2.0 * tp + fp + fn_));
        }
        if tp + fn_ > 0.0 {
            rec.push(tp / (tp + fn_));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&iou), mean(&dice), mean(&rec))
}

pub fn check_metrics(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    let mut dice_dominates = true;
    let mut cases: Vec<(LabelMap, LabelMap, usize)> = vec![(
        LabelMap::new(2, 2, vec![0, 0, 1, 1]).expect("valid"),
        LabelMap::new(2, 2, vec![0, 1, 0, 1]).expect("valid"),
        2,
    )];
    for _ in 0..50 {
        let mut draw =
            || LabelMap::new(8, 8, (0..64).map(|_| rng.range_inclusive(0, 3) as u8).collect()).expect("valid");
        cases.push((draw(), draw(), 4));
    }
    for (pred, gt, k) in &cases {
        let mut acc = ConfusionAccumulator::new(*k);
        let report = acc.accumulate(pred, gt).and_then(|_| acc.report());
        let Ok(r) = report else {
            return Check::new("oracle:metrics", false, "report failed".into());
        };
        let (i, d, rc) = metric_oracle(pred, gt, *k);
        worst = worst
            .max((r.miou - i).abs())
            .max((r.mdice - d).abs())
            .max((r.mrecall - rc).abs());
        dice_dominates &= r
            .per_class
            .iter()
            .all(|s| s.dice.unwrap_or(0.0) >= s.iou.unwrap_or(0.0));
    }
    let hand = {
        let mut acc = ConfusionAccumulator::new(2);
        let (p, g, _) = &cases[0];
        acc.accumulate(p, g).and_then(|_| acc.report()).ok()
    };
    let hand_ok = hand.is_some_and(|r| {
        (r.miou - 1.0 / 3.0).abs() < ORACLE_TOLERANCE
            && (r.mdice - 0.5).abs() < ORACLE_TOLERANCE
            && (r.mrecall - 0.5).abs() < ORACLE_TOLERANCE
    });
    Check::new(
        "oracle:metrics",
        worst <= ORACLE_TOLERANCE && dice_dominates && hand_ok,
        format!("max diff {worst:.3e}, dice >= iou {dice_dominates}, 2x2 case {hand_ok}"),
    )
}

pub fn check_bridge(seed: u64) -> Check {
    let g = Graph::new();
    let mut rng = SplitMix64::new(seed);
    let zi = g.leaf(Tensor::uniform([4, 4, 4], 2.0, &mut rng));
    let zj = g.leaf(Tensor::uniform([4, 2, 2], 2.0, &mut rng));
    let zero = g.leaf(Tensor::zeros([4]));
    let mut run = || -> Result<(bool, bool, bool, bool)> {
        let half = gate_alpha(&zi, &zj, &zero, &zero)?.item()? == 0.5;
        let mut in_range = true;
        for _ in 0..20 {
            let w1 = g.leaf(Tensor::uniform([4], 10.0, &mut rng));
            let w2 = g.leaf(Tensor::uniform([4], 10.0, &mut rng));
            let a = gate_alpha(&zi, &zj, &w1, &w2)?.item()?;
            in_range &= a > 0.0 && a < 1.0;
        }
        let up = zj.upsample_to(4, 4)?.value();
        let one = g.constant(Tensor::scalar(1.0));
        let nil = g.constant(Tensor::scalar(0.0));
        let endpoints =
            bridge_pair(&zi, &zj, &one)?.value() == zi.value() && bridge_pair(&zi, &zj, &nil)?.value() == up;
        let mut bounded = true;
        for _ in 0..20 {
            let a = g.constant(Tensor::scalar(rng.next_f64()));
            let f = bridge_pair(&zi, &zj, &a)?.value();
            bounded &= f
                .data()
                .iter()
                .zip(zi.value().data())
                .zip(up.data())
                .all(|((&v, &x), &y)| v >= x.min(y) && v <= x.max(y));
        }
        Ok((half, in_range, endpoints, bounded))
    };
    match run() {
        Ok((a, b, c, d)) => Check::new(
            "invariant:gate_and_bridge",
            a && b && c && d,
            format!("alpha 0.5 {a}, alpha in (0,1) {b}, endpoints {c}, bounded {d}"),
        ),
        Err(e) => Check::new("invariant:gate_and_bridge", false, e.to_string()),
    }
}

pub fn check_residual_identities(seed: u64) -> Check {
    let run = || -> Result<(bool, bool)> {
        let mut rng = SplitMix64::new(seed);
        let mut store = ParamStore::new();
        let block = EncoderBlock::init(&mut store, "encoder.l1", 6, &mut rng);
        let dec = Decoder::init(
            &mut store,
            &DecoderConfig {
                feature_channels: 6,
                num_classes: 3,
                query_dim: 5,
                rounds: 1,
            },
            &mut rng,
        )?;
        store.zero_prefix("encoder.");
        store.zero_prefix("decoder.round");
        let g = Graph::new();
        let p = store.bind(&g);
        let f = g.leaf(Tensor::uniform([6, 4, 4], 3.0, &mut rng));
        let enc = encode_scale(&f, &block, &p)?.value() == f.value();
        let q = g.leaf(Tensor::uniform([3, 5], 3.0, &mut rng));
        let z = g.leaf(Tensor::uniform([16, 5], 3.0, &mut rng));
        let dec_ok = decode_step(&q, &z, &dec.rounds[0], &p)?.value() == q.value();
        Ok((enc, dec_ok))
    };
    match run() {
        Ok((e, d)) => Check::new(
            "invariant:residual_identity",
            e && d,
            format!("encoder {e}, decoder {d}"),
        ),
        Err(e) => Check::new("invariant:residual_identity", false, e.to_string()),
    }
}

/// Runs every check; `composite_seeds` full-model gradient checks.
pub fn run_all(composite_seeds: u64) -> VerifyReport {
    let mut checks = check_op_gradients(7);
    checks.extend((0..composite_seeds).map(check_composite_gradient));
    checks.push(check_conv_oracle(11));
    checks.push(check_sobel());
    checks.push(check_metrics(13));
    checks.push(check_bridge(17));
    checks.push(check_residual_identities(19));
    VerifyReport { checks }
}
