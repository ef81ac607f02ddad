//! Images, label maps, Sobel edges, edge pyramids and augmentation.

mod augment;
mod palette;
pub mod pnm;
mod sobel;

pub use augment::{apply_crop_scale, augment_crop_scale, CropScale, DEFAULT_SCALE_RANGE};
pub use palette::{colorize_labels, decolorize, palette};
pub use sobel::{build_edge_pyramid, sobel_edge, sobel_kernels, EDGE_NORMALIZER};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// RGB image, planar `[3, H, W]`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != 3 * height * width {
            return Err(Error::InvalidShape {
                op: "image",
                shape: vec![3, height, width],
                reason: format!("{} values supplied", data.len()),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, height * width))
            .collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value.clamp(0.0, 1.0);
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        [0, 1, 2].map(|c| self.get(c, row, col))
    }

    /// Unweighted channel mean, `[1, H, W]`.
    pub fn grayscale(&self) -> Tensor {
        let plane = self.height * self.width;
        Tensor::from_fn([1, self.height, self.width], |i| {
            (self.data[i] + self.data[plane + i] + self.data[2 * plane + i]) / 3.0
        })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([3, self.height, self.width], self.data.clone()).expect("valid image")
    }

    /// Every value rounded to the nearest multiple of 1/255.
    pub fn quantized(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| quantize(v) as f64 / 255.0).collect(),
        }
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Per-pixel class indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::InvalidShape {
                op: "label_map",
                shape: vec![height, width],
                reason: format!("{} labels supplied", labels.len()),
            });
        }
        Ok(Self { height, width, labels })
    }

    pub fn filled(height: usize, width: usize, class: u8) -> Self {
        Self::new(height, width, vec![class; height * width]).expect("positive dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: u8) {
        self.labels[row * self.width + col] = class;
    }

    /// First label `>= num_classes`, if any.
    pub fn first_out_of_range(&self, num_classes: usize) -> Option<u8> {
        self.labels.iter().copied().find(|&l| l as usize >= num_classes)
    }

    /// Pixel count per class for classes `0..num_classes`.
    pub fn histogram(&self, num_classes: usize) -> Vec<usize> {
        let mut h = vec![0; num_classes];
        for &l in &self.labels {
            if (l as usize) < num_classes {
                h[l as usize] += 1;
            }
        }
        h
    }
}

/// Normalized gradient magnitude in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl EdgeMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidShape {
                op: "edge_map",
                shape: vec![height, width],
                reason: format!("{} values supplied", values.len()),
            });
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `[1, H, W]`
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([1, self.height, self.width], self.values.clone()).expect("valid edge map")
    }
}

/// An RGB image with its ground-truth label map.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub labels: LabelMap,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: Image, labels: LabelMap) -> Result<Self> {
        if image.dims() != labels.dims() {
            return Err(Error::InvalidShape {
                op: "sample",
                shape: vec![labels.height(), labels.width()],
                reason: format!("image is {:?}", image.dims()),
            });
        }
        Ok(Self {
            id: id.into(),
            image,
            labels,
        })
    }
}
