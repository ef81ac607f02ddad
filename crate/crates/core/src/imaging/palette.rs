use std::collections::HashMap;

use super::{Image, LabelMap};
use crate::error::{Error, Result};

/// Class 0 is black; classes `1..n` get fully saturated colors at evenly
/// spaced hues, starting from red.
pub fn palette(num_classes: usize) -> Vec<[u8; 3]> {
    let mut table = vec![[0, 0, 0]];
    let fg = num_classes.saturating_sub(1);
    for k in 0..fg {
        table.push(hue_to_rgb(360.0 * k as f64 / fg as f64));
    }
    table.truncate(num_classes.max(1));
    table
}

fn hue_to_rgb(hue: f64) -> [u8; 3] {
    let h = hue / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b].map(|v: f64| (v * 255.0).round() as u8)
}

pub fn colorize_labels(labels: &LabelMap, palette: &[[u8; 3]]) -> Result<Image> {
    if let Some(bad) = labels.first_out_of_range(palette.len()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} has no palette entry ({} colors)",
            palette.len()
        )));
    }
    let (h, w) = labels.dims();
    let mut data = vec![0.0; 3 * h * w];
    for (i, &l) in labels.labels().iter().enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = palette[l as usize][c] as f64 / 255.0;
        }
    }
    Image::new(h, w, data)
}

/// Inverse of [`colorize_labels`] for an 8-bit quantized image.
pub fn decolorize(image: &Image, palette: &[[u8; 3]]) -> Result<LabelMap> {
    let lookup: HashMap<[u8; 3], u8> = palette.iter().enumerate().map(|(k, &rgb)| (rgb, k as u8)).collect();
    let (h, w) = image.dims();
    let mut labels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let rgb = image.pixel(r, c).map(super::quantize);
            let k = lookup
                .get(&rgb)
                .ok_or_else(|| Error::InvalidArgument(format!("color {rgb:?} not in palette")))?;
            labels.push(*k);
        }
    }
    LabelMap::new(h, w, labels)
}
