//! Random scale-then-crop augmentation with nearest-neighbor resampling.

use super::{Image, LabelMap, Sample};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.75, 1.25);

/// Geometry of one augmentation: scale the source by `scale`, then take the
/// window whose top-left corner is `(top, left)` in the scaled frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropScale {
    pub scale: f64,
    pub top: usize,
    pub left: usize,
}

fn scaled_len(len: usize, scale: f64) -> usize {
    ((len as f64 * scale).round() as usize).max(1)
}

/// Source index sampled by scaled index `i`.
fn source_index(i: usize, scale: f64, len: usize) -> usize {
    ((i as f64 / scale).floor() as usize).min(len - 1)
}

pub fn apply_crop_scale(sample: &Sample, params: CropScale, out: (usize, usize)) -> Result<Sample> {
    let (h, w) = sample.image.dims();
    let (oh, ow) = out;
    if !(params.scale.is_finite() && params.scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale {} must be positive",
            params.scale
        )));
    }
    let (sh, sw) = (scaled_len(h, params.scale), scaled_len(w, params.scale));
    if oh == 0 || ow == 0 || params.top + oh > sh || params.left + ow > sw {
        return Err(Error::InvalidArgument(format!(
            "crop {oh}x{ow} at ({}, {}) does not fit the {sh}x{sw} scaled source",
            params.top, params.left
        )));
    }
    let rows: Vec<usize> = (0..oh).map(|r| source_index(params.top + r, params.scale, h)).collect();
    let cols: Vec<usize> = (0..ow)
        .map(|c| source_index(params.left + c, params.scale, w))
        .collect();

    let mut data = Vec::with_capacity(3 * oh * ow);
    for ch in 0..3 {
        for &r in &rows {
            for &c in &cols {
                data.push(sample.image.get(ch, r, c));
            }
        }
    }
    let mut labels = Vec::with_capacity(oh * ow);
    for &r in &rows {
        for &c in &cols {
            labels.push(sample.labels.get(r, c));
        }
    }
    Sample::new(
        sample.id.clone(),
        Image::new(oh, ow, data)?,
        LabelMap::new(oh, ow, labels)?,
    )
}

/// Draws a scale uniformly from `scale_range` and a crop window uniformly
/// from the valid positions, then applies them to image and labels alike.
pub fn augment_crop_scale(
    sample: &Sample,
    rng: &mut SplitMix64,
    out: (usize, usize),
    scale_range: (f64, f64),
) -> Result<Sample> {
    let (lo, hi) = scale_range;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad scale range [{lo}, {hi}]")));
    }
    let scale = rng.uniform(lo, hi);
    let (h, w) = sample.image.dims();
    let (sh, sw) = (scaled_len(h, scale), scaled_len(w, scale));
    if out.0 > sh || out.1 > sw {
        return Err(Error::InvalidArgument(format!(
            "output {}x{} larger than scaled source {sh}x{sw}",
            out.0, out.1
        )));
    }
    let top = rng.range_inclusive(0, sh - out.0);
    let left = rng.range_inclusive(0, sw - out.1);
    apply_crop_scale(sample, CropScale { scale, top, left }, out)
}
