//! The composite objective `λ₁·L_cls + λ₂·L_mask + λ₃·L_edge`.
//!
//! Query `k` is matched to class `k`. `L_cls` is the mean cross-entropy of
//! each query against its class (or against background when the class is
//! absent from the ground truth). `L_mask` is per-pixel BCE plus a Dice
//! loss smoothed by `ε = 1`, averaged over queries. Probabilities are
//! clamped at `1e-12` before every logarithm.

use serde::{Deserialize, Serialize};

use crate::befbm::edge_loss_from_maps;
use crate::error::{Error, Result};
use crate::imaging::LabelMap;
use crate::tensor::{Tensor, Var};

pub const PROB_CLAMP: f64 = 1e-12;
pub const DICE_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = Self {
            lambda1,
            lambda2,
            lambda3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be a finite value >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub mask: f64,
    pub edge: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Accumulates `other · weight` component-wise.
    pub fn add_scaled(&mut self, other: &LossBreakdown, weight: f64) {
        self.cls += other.cls * weight;
        self.mask += other.mask * weight;
        self.edge += other.edge * weight;
        self.total += other.total * weight;
    }
}

/// Differentiable loss terms of one sample.
pub struct LossTerms<'g> {
    pub cls: Var<'g>,
    pub mask: Var<'g>,
    pub edge: Var<'g>,
    pub total: Var<'g>,
}

impl LossTerms<'_> {
    pub fn breakdown(&self) -> Result<LossBreakdown> {
        Ok(LossBreakdown {
            cls: self.cls.item()?,
            mask: self.mask.item()?,
            edge: self.edge.item()?,
            total: self.total.item()?,
        })
    }
}

/// Which classes occupy at least one ground-truth pixel.
pub fn present_classes(gt: &LabelMap, num_classes: usize) -> Vec<bool> {
    gt.histogram(num_classes).iter().map(|&n| n > 0).collect()
}

/// `−mean_k log p_k(target_k)` for `[K, C_cls]` probabilities with `K = C_cls`.
pub fn cls_loss<'g>(class_probs: &Var<'g>, present: &[bool]) -> Result<Var<'g>> {
    let s = class_probs.shape();
    if s.len() != 2 || s[0] != s[1] || present.len() != s[0] {
        return Err(Error::InvalidShape {
            op: "cls_loss",
            shape: s,
            reason: format!("expected [K, K] probabilities for {} classes", present.len()),
        });
    }
    let c = s[1];
    let picks: Vec<usize> = present
        .iter()
        .enumerate()
        .map(|(k, &here)| k * c + if here { k } else { 0 })
        .collect();
    Ok(class_probs
        .reshape([s[0] * c])?
        .gather(&picks)?
        .log_clamped(PROB_CLAMP)
        .mean()
        .neg())
}

/// One-hot targets `[K, H, W]` with `G_k = [gt == k]`.
pub fn one_hot(gt: &LabelMap, num_classes: usize) -> Tensor {
    let hw = gt.height() * gt.width();
    let labels = gt.labels();
    Tensor::from_fn([num_classes, gt.height(), gt.width()], |i| {
        f64::from(usize::from(labels[i % hw]) == i / hw)
    })
}

/// Mean over queries of `BCE(M_k, G_k) + DiceLoss(M_k, G_k)`.
pub fn mask_loss<'g>(masks: &Var<'g>, gt: &LabelMap) -> Result<Var<'g>> {
    let s = masks.shape();
    if s.len() != 3 || (s[1], s[2]) != gt.dims() {
        return Err(Error::ShapeMismatch {
            op: "mask_loss",
            lhs: s,
            rhs: vec![gt.height(), gt.width()],
        });
    }
    if let Some(bad) = gt.first_out_of_range(s[0]) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} has no matching query ({} queries)",
            s[0]
        )));
    }
    let (k, hw) = (s[0], s[1] * s[2]);
    let g = masks.graph();
    let target = one_hot(gt, k);

    // For binary targets the BCE argument is M where G = 1 and 1 − M where
    // G = 0, i.e. (1 − G) + (2G − 1)·M.
    let sign = g.constant(target.map(|t| 2.0 * t - 1.0));
    let offset = g.constant(target.map(|t| 1.0 - t));
    let bce = masks.mul(&sign)?.add(&offset)?.log_clamped(PROB_CLAMP).mean().neg();

    let target = g.constant(target.reshape([k, hw])?);
    let flat = masks.reshape([k, hw])?;
    let inter = flat
        .mul(&target)?
        .sum_last_axis()?
        .scale(2.0)
        .add_scalar(DICE_SMOOTHING);
    let denom = flat
        .sum_last_axis()?
        .add(&target.sum_last_axis()?)?
        .add_scalar(DICE_SMOOTHING);
    let dice = inter.div(&denom)?.neg().add_scalar(1.0).mean();
    bce.add(&dice)
}

/// `(λ₁·cls + λ₂·mask) + λ₃·edge`.
pub fn total_loss<'g>(cls: &Var<'g>, mask: &Var<'g>, edge: &Var<'g>, w: &LossWeights) -> Result<Var<'g>> {
    cls.scale(w.lambda1)
        .add(&mask.scale(w.lambda2))?
        .add(&edge.scale(w.lambda3))
}

/// All loss terms for one sample given the model outputs and targets.
pub fn sample_loss<'g>(
    class_probs: &Var<'g>,
    masks: &Var<'g>,
    boundary: &[Var<'g>],
    gt: &LabelMap,
    edges: &[Tensor],
    weights: &LossWeights,
) -> Result<LossTerms<'g>> {
    let present = present_classes(gt, class_probs.shape()[0]);
    let cls = cls_loss(class_probs, &present)?;
    let mask = mask_loss(masks, gt)?;
    let edge = edge_loss_from_maps(boundary, edges)?;
    let total = total_loss(&cls, &mask, &edge, weights)?;
    Ok(LossTerms { cls, mask, edge, total })
}
