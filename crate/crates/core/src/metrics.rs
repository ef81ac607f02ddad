//! Confusion-count metrics (mIoU, mDice, mRecall), boundary F1 and a
//! forward-pass throughput bench.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::LabelMap;

/// Per-class true positive, false positive and false negative pixel counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionAccumulator {
    pub fn new(num_classes: usize) -> Self {
        Self {
            tp: vec![0; num_classes],
            fp: vec![0; num_classes],
            fn_: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::Metrics(format!(
                "prediction is {:?} but ground truth is {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        let k = self.num_classes();
        if let Some(v) = pred.first_out_of_range(k).or(gt.first_out_of_range(k)) {
            return Err(Error::Metrics(format!("label {v} outside {k} classes")));
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if p == g {
                self.tp[p as usize] += 1;
            } else {
                self.fp[p as usize] += 1;
                self.fn_[g as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(Error::Metrics(
                "merging accumulators with different class counts".into(),
            ));
        }
        for c in 0..self.num_classes() {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        Ok(())
    }

    pub fn report(&self) -> Result<SegmentationScores> {
        let mut per_class = Vec::with_capacity(self.num_classes());
        for c in 0..self.num_classes() {
            let (tp, fp, fn_) = (self.tp[c] as f64, self.fp[c] as f64, self.fn_[c] as f64);
            let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
            per_class.push(ClassScores {
                iou: ratio(tp, tp + fp + fn_),
                dice: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
                recall: ratio(tp, tp + fn_),
            });
        }
        let macro_mean = |f: fn(&ClassScores) -> Option<f64>| {
            let vals: Vec<f64> = per_class.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let miou = macro_mean(|s| s.iou).ok_or_else(|| Error::Metrics("no pixels accumulated".into()))?;
        Ok(SegmentationScores {
            miou,
            mdice: macro_mean(|s| s.dice).unwrap_or(0.0),
            mrecall: macro_mean(|s| s.recall).unwrap_or(0.0),
            per_class,
        })
    }
}

/// Per-class values; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub iou: Option<f64>,
    pub dice: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScores {
    pub miou: f64,
    pub mdice: f64,
    pub mrecall: f64,
    pub per_class: Vec<ClassScores>,
}

/// Pixels with a 4-neighbour of a different class.
pub fn boundary_pixels(labels: &LabelMap) -> Vec<bool> {
    let (h, w) = labels.dims();
    let mut out = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let v = labels.get(r, c);
            out[r * w + c] = (r > 0 && labels.get(r - 1, c) != v)
                || (r + 1 < h && labels.get(r + 1, c) != v)
                || (c > 0 && labels.get(r, c - 1) != v)
                || (c + 1 < w && labels.get(r, c + 1) != v);
        }
    }
    out
}

/// Matched and total boundary pixel counts, poolable across images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub pred_matched: u64,
    pub pred_total: u64,
    pub gt_matched: u64,
    pub gt_total: u64,
}

impl BoundaryCounts {
    pub fn merge(&mut self, other: &BoundaryCounts) {
        self.pred_matched += other.pred_matched;
        self.pred_total += other.pred_total;
        self.gt_matched += other.gt_matched;
        self.gt_total += other.gt_total;
    }

    pub fn precision(&self) -> f64 {
        if self.pred_total == 0 {
            return if self.gt_total == 0 { 1.0 } else { 0.0 };
        }
        self.pred_matched as f64 / self.pred_total as f64
    }

    pub fn recall(&self) -> f64 {
        if self.gt_total == 0 {
            return if self.pred_total == 0 { 1.0 } else { 0.0 };
        }
        self.gt_matched as f64 / self.gt_total as f64
    }

    /// 1 when both boundary sets are empty, 0 when exactly one is or when
    /// nothing matches.
    pub fn f1(&self) -> f64 {
        if self.pred_total == 0 && self.gt_total == 0 {
            return 1.0;
        }
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Counts boundary pixels of each map lying within Chebyshev distance
/// `tolerance` of a boundary pixel of the other.
pub fn boundary_counts(pred: &LabelMap, gt: &LabelMap, tolerance: usize) -> Result<BoundaryCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::Metrics(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let (h, w) = pred.dims();
    let bp = boundary_pixels(pred);
    let bg = boundary_pixels(gt);
    let matched = |from: &[bool], to: &[bool]| -> (u64, u64) {
        let reach = dilate(to, h, w, tolerance);
        let total = from.iter().filter(|&&b| b).count() as u64;
        let hit = from.iter().zip(&reach).filter(|(&b, &r)| b && r).count() as u64;
        (hit, total)
    };
    let (pred_matched, pred_total) = matched(&bp, &bg);
    let (gt_matched, gt_total) = matched(&bg, &bp);
    Ok(BoundaryCounts {
        pred_matched,
        pred_total,
        gt_matched,
        gt_total,
    })
}

/// Square dilation of a mask by `radius`, separable along rows and columns.
fn dilate(mask: &[bool], h: usize, w: usize, radius: usize) -> Vec<bool> {
    let mut rows = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(w - 1);
            rows[r * w + c] = (lo..=hi).any(|cc| mask[r * w + cc]);
        }
    }
    let mut out = vec![false; h * w];
    for r in 0..h {
        let lo = r.saturating_sub(radius);
        let hi = (r + radius).min(h - 1);
        for c in 0..w {
            out[r * w + c] = (lo..=hi).any(|rr| rows[rr * w + c]);
        }
    }
    out
}

pub fn boundary_f1(pred: &LabelMap, gt: &LabelMap, tolerance: usize) -> Result<f64> {
    Ok(boundary_counts(pred, gt, tolerance)?.f1())
}

/// Full evaluation report as emitted by the command line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub miou: f64,
    pub mdice: f64,
    pub mrecall: f64,
    pub boundary_f1: f64,
    pub fps: f64,
    pub per_class: BTreeMap<String, ClassScores>,
}

/// Accumulates confusion and pooled boundary counts over many images.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub confusion: ConfusionAccumulator,
    pub boundary: BoundaryCounts,
    pub tolerance: usize,
}

impl Evaluator {
    pub fn new(num_classes: usize, tolerance: usize) -> Self {
        Self {
            confusion: ConfusionAccumulator::new(num_classes),
            boundary: BoundaryCounts::default(),
            tolerance,
        }
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        self.confusion.accumulate(pred, gt)?;
        self.boundary.merge(&boundary_counts(pred, gt, self.tolerance)?);
        Ok(())
    }

    pub fn report(&self, class_names: &[&str], fps: f64) -> Result<MetricsReport> {
        let scores = self.confusion.report()?;
        let per_class = scores
            .per_class
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let name = class_names
                    .get(c)
                    .map_or_else(|| format!("class{c}"), |n| n.to_string());
                (name, *s)
            })
            .collect();
        Ok(MetricsReport {
            miou: scores.miou,
            mdice: scores.mdice,
            mrecall: scores.mrecall,
            boundary_f1: self.boundary.f1(),
            fps,
            per_class,
        })
    }
}

/// Predicts the most frequent ground-truth class of `gts` everywhere and
/// returns its mIoU against the same maps.
pub fn majority_baseline_miou(gts: &[LabelMap], num_classes: usize) -> Result<f64> {
    let mut counts = vec![0usize; num_classes];
    for gt in gts {
        for (c, n) in gt.histogram(num_classes).into_iter().enumerate() {
            counts[c] += n;
        }
    }
    let majority = (0..num_classes).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    let mut acc = ConfusionAccumulator::new(num_classes);
    for gt in gts {
        let pred = LabelMap::filled(gt.height(), gt.width(), majority as u8);
        acc.accumulate(&pred, gt)?;
    }
    Ok(acc.report()?.miou)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpsReport {
    pub fps: f64,
    pub element_type: String,
    pub height: usize,
    pub width: usize,
    pub batch_size: usize,
    pub warmup: usize,
    pub timed: usize,
    pub seconds: f64,
}

pub const FPS_WARMUP: usize = 5;
pub const FPS_TIMED: usize = 50;

/// Calls `forward` `warmup` times untimed, then `timed` times under the
/// clock; images/second over the timed calls.
pub fn fps_bench(
    mut forward: impl FnMut() -> Result<()>,
    size: (usize, usize),
    warmup: usize,
    timed: usize,
) -> Result<FpsReport> {
    if timed == 0 {
        return Err(Error::InvalidArgument("timed count must be at least 1".into()));
    }
    for _ in 0..warmup {
        forward()?;
    }
    let start = Instant::now();
    for _ in 0..timed {
        forward()?;
    }
    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(FpsReport {
        fps: timed as f64 / seconds,
        element_type: "f64".into(),
        height: size.0,
        width: size.1,
        batch_size: 1,
        warmup,
        timed,
        seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(h: usize, w: usize, v: &[u8]) -> LabelMap {
        LabelMap::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_two_by_two() {
        let pred = map(2, 2, &[0, 0, 1, 1]);
        let gt = map(2, 2, &[0, 1, 0, 1]);
        let mut acc = ConfusionAccumulator::new(2);
        acc.accumulate(&pred, &gt).unwrap();
        assert_eq!(
            (acc.tp.clone(), acc.fp.clone(), acc.fn_.clone()),
            (vec![1, 1], vec![1, 1], vec![1, 1])
        );
        let r = acc.report().unwrap();
        assert!((r.miou - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.mdice - 0.5).abs() < 1e-15);
        assert!((r.mrecall - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_disjoint() {
        let gt = map(2, 3, &[0, 1, 2, 2, 1, 0]);
        let mut acc = ConfusionAccumulator::new(4);
        acc.accumulate(&gt, &gt).unwrap();
        let r = acc.report().unwrap();
        assert_eq!((r.miou, r.mdice, r.mrecall), (1.0, 1.0, 1.0));
        assert!(r.per_class[3].iou.is_none());

        let mut acc = ConfusionAccumulator::new(4);
        acc.accumulate(&LabelMap::filled(2, 3, 3), &gt).unwrap();
        assert_eq!(acc.report().unwrap().miou, 0.0);
    }

    #[test]
    fn empty_accumulator_and_dim_mismatch_error() {
        assert!(ConfusionAccumulator::new(3).report().is_err());
        let mut acc = ConfusionAccumulator::new(3);
        assert!(acc
            .accumulate(&LabelMap::filled(2, 2, 0), &LabelMap::filled(2, 3, 0))
            .is_err());
        assert!(acc
            .accumulate(&LabelMap::filled(2, 2, 5), &LabelMap::filled(2, 2, 0))
            .is_err());
    }

    #[test]
    fn boundary_cases() {
        let mut gt = LabelMap::filled(8, 8, 0);
        for r in 0..8 {
            for c in 4..8 {
                gt.set(r, c, 1);
            }
        }
        assert_eq!(boundary_f1(&gt, &gt, 1).unwrap(), 1.0);
        assert_eq!(boundary_f1(&LabelMap::filled(8, 8, 0), &gt, 1).unwrap(), 0.0);
        assert_eq!(
            boundary_f1(&LabelMap::filled(8, 8, 0), &LabelMap::filled(8, 8, 1), 1).unwrap(),
            1.0
        );

        let mut shifted = LabelMap::filled(8, 8, 0);
        for r in 0..8 {
            for c in 5..8 {
                shifted.set(r, c, 1);
            }
        }
        assert_eq!(boundary_f1(&shifted, &gt, 1).unwrap(), 1.0);
        assert!(boundary_f1(&shifted, &gt, 0).unwrap() < 1.0);
    }

    #[test]
    fn majority_baseline() {
        let gts = [map(1, 4, &[0, 0, 0, 1]), map(1, 4, &[0, 2, 0, 0])];
        // Predicting 0 everywhere: IoU_0 = 6/8, classes 1 and 2 get 0.
        let expected = (6.0 / 8.0) / 3.0;
        assert!((majority_baseline_miou(&gts, 3).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn bench_invocation_count() {
        let mut calls = 0;
        let r = fps_bench(
            || {
                calls += 1;
                Ok(())
            },
            (64, 64),
            5,
            50,
        )
        .unwrap();
        assert_eq!(calls, 55);
        assert!(r.fps > 0.0);
        assert_eq!(r.element_type, "f64");
    }
}
