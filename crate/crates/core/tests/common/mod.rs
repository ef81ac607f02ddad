//! Reference implementations written independently of the library code
//! they check.

#![allow(dead_code)]

use boundary_seg::imaging::{build_edge_pyramid, sobel_edge, Image, LabelMap};
use boundary_seg::losses::LossWeights;
use boundary_seg::params::Bound;
use boundary_seg::rng::SplitMix64;
use boundary_seg::{Graph, Model, Tensor};

/// Convolution by materializing a replicate-padded copy of the input and
/// sliding the kernel over it.
pub fn conv_padded(input: &Tensor, kernel: &Tensor, stride: usize) -> Tensor {
    let s = input.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    let k = kernel.shape();
    let (co, kh, kw) = (k[0], k[2], k[3]);
    let (ph, pw) = (kh / 2, kw / 2);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut padded = vec![0.0; c * hp * wp];
    for ch in 0..c {
        for y in 0..hp {
            for x in 0..wp {
                let sy = y.saturating_sub(ph).min(h - 1);
                let sx = x.saturating_sub(pw).min(w - 1);
                padded[(ch * hp + y) * wp + x] = input.data()[(ch * h + sy) * w + sx];
            }
        }
    }
    let (oh, ow) = ((h - 1) / stride + 1, (w - 1) / stride + 1);
    let mut out = vec![0.0; co * oh * ow];
    for o in 0..co {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for ch in 0..c {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let kv = kernel.data()[((o * c + ch) * kh + dy) * kw + dx];
                            let iv = padded[(ch * hp + y * stride + dy) * wp + x * stride + dx];
                            acc += kv * iv;
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    Tensor::new([co, oh, ow], out).unwrap()
}

/// Per-class (tp, fp, fn) by looping over classes, then over pixels.
pub fn brute_counts(pred: &LabelMap, gt: &LabelMap, k: usize) -> Vec<(u64, u64, u64)> {
    (0..k)
        .map(|c| {
            let mut t = (0, 0, 0);
            for r in 0..gt.height() {
                for col in 0..gt.width() {
                    let p = pred.get(r, col) as usize == c;
                    let g = gt.get(r, col) as usize == c;
                    match (p, g) {
                        (true, true) => t.0 += 1,
                        (true, false) => t.1 += 1,
                        (false, true) => t.2 += 1,
                        _ => {}
                    }
                }
            }
            t
        })
        .collect()
}

/// (mIoU, mDice, mRecall) from brute-force counts.
pub fn brute_scores(pred: &LabelMap, gt: &LabelMap, k: usize) -> (f64, f64, f64) {
    let counts = brute_counts(pred, gt, k);
    let mut iou = vec![];
    let mut dice = vec![];
    let mut recall = vec![];
    for (tp, fp, fn_) in counts {
        let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
        if tp + fp + fn_ > 0.0 {
            iou.push(tp / (tp + fp + fn_));
            dice.push(2.0 * tp / (2.0 * tp + fp + fn_));
        }
        if tp + fn_ > 0.0 {
            recall.push(tp / (tp + fn_));
        }
    }
    let avg = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    (avg(iou), avg(dice), avg(recall))
}

fn boundary_set(m: &LabelMap) -> Vec<(usize, usize)> {
    let (h, w) = m.dims();
    let mut out = vec![];
    for r in 0..h {
        for c in 0..w {
            let v = m.get(r, c);
            let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
            if neighbours.iter().any(|&(y, x)| y < h && x < w && m.get(y, x) != v) {
                out.push((r, c));
            }
        }
    }
    out
}

/// Boundary F1 by exhaustive pairwise Chebyshev distance search.
pub fn brute_boundary_f1(pred: &LabelMap, gt: &LabelMap, tol: usize) -> f64 {
    let (bp, bg) = (boundary_set(pred), boundary_set(gt));
    if bp.is_empty() && bg.is_empty() {
        return 1.0;
    }
    if bp.is_empty() || bg.is_empty() {
        return 0.0;
    }
    let near = |a: &(usize, usize), set: &[(usize, usize)]| {
        set.iter().any(|b| a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) <= tol)
    };
    let p = bp.iter().filter(|a| near(a, &bg)).count() as f64 / bp.len() as f64;
    let r = bg.iter().filter(|a| near(a, &bp)).count() as f64 / bg.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn random_labels(rng: &mut SplitMix64, h: usize, w: usize, k: usize) -> LabelMap {
    LabelMap::new(h, w, (0..h * w).map(|_| rng.range_inclusive(0, k - 1) as u8).collect()).unwrap()
}

pub fn random_image(rng: &mut SplitMix64, h: usize, w: usize) -> Image {
    Image::new(h, w, (0..3 * h * w).map(|_| rng.next_f64()).collect()).unwrap()
}

/// A full-model training objective over (parameters..., image) tensors.
pub struct Objective {
    pub model: Model,
    pub image: Image,
    pub gt: LabelMap,
    pub edges: Vec<Tensor>,
    pub weights: LossWeights,
}

impl Objective {
    pub fn new(model: Model, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let (h, w) = model.config.image_size;
        let image = random_image(&mut rng, h, w);
        let gt = random_labels(&mut rng, h, w, model.config.num_classes);
        let edges = build_edge_pyramid(&sobel_edge(&image), &model.config.scale_dims())
            .unwrap()
            .iter()
            .map(|e| e.to_tensor())
            .collect();
        Self {
            model,
            image,
            gt,
            edges,
            weights: LossWeights::default(),
        }
    }

    pub fn inputs(&self) -> Vec<Tensor> {
        let mut v = self.model.params.tensors().to_vec();
        v.push(self.image.to_tensor());
        v
    }

    /// Loss value and (optionally) analytic gradients for the given inputs.
    pub fn eval(&self, inputs: &[Tensor], with_grad: bool) -> (f64, Vec<Tensor>) {
        let g = Graph::new();
        let vars: Vec<_> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let (params, x) = vars.split_at(vars.len() - 1);
        let p = Bound::from_vars(params.to_vec());
        let (_, terms) = self
            .model
            .loss(&x[0], &p, &self.gt, &self.edges, &self.weights)
            .unwrap();
        let value = terms.total.item().unwrap();
        if !with_grad {
            return (value, vec![]);
        }
        g.backward(terms.total).unwrap();
        let grads = vars
            .iter()
            .zip(inputs)
            .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros_like(t)))
            .collect();
        (value, grads)
    }
}

/// Worst relative error between analytic gradients and central differences
/// `(f(x+h) − f(x−h)) / 2h`, over every coordinate of every input.
pub fn central_difference_error(f: impl Fn(&[Tensor]) -> f64, inputs: &[Tensor], analytic: &[Tensor], h: f64) -> f64 {
    let mut work = inputs.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..inputs.len() {
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            work[i].data_mut()[j] = x + h;
            let up = f(&work);
            work[i].data_mut()[j] = x - h;
            let down = f(&work);
            work[i].data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i].data()[j];
            worst = worst.max((a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs()));
        }
    }
    worst
}
