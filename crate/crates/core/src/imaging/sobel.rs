use super::{EdgeMap, Image};
use crate::error::{Error, Result};
use crate::tensor::{kernels, Graph, Tensor};

/// Largest Sobel magnitude attainable on a `[0, 1]` image: `|gx| = |gy| = 4`.
pub const EDGE_NORMALIZER: f64 = 4.0 * std::f64::consts::SQRT_2;

/// `[Gx, Gy]` as a `[2, 1, 3, 3]` kernel stack.
pub fn sobel_kernels() -> Tensor {
    #[rustfmt::skip]
    let data = vec![
        -1.0, 0.0, 1.0,
        -2.0, 0.0, 2.0,
        -1.0, 0.0, 1.0,

        -1.0, -2.0, -1.0,
         0.0,  0.0,  0.0,
         1.0,  2.0,  1.0,
    ];
    Tensor::new([2, 1, 3, 3], data).unwrap()
}

fn gx_kernel() -> Tensor {
    Tensor::new([1, 1, 3, 3], sobel_kernels().data()[..9].to_vec()).unwrap()
}

fn transpose_plane(t: &Tensor) -> Tensor {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    Tensor::new([1, w, h], kernels::transpose(t.data(), h, w)).unwrap()
}

/// Sobel gradient magnitude of the channel-mean image, scaled into `[0, 1]`.
/// No pre-smoothing is applied.
///
/// `gy` is computed as `gx` of the transposed image. Gx taps accumulate as
/// `-a + b` pairs, so flat regions give exactly zero on both axes.
pub fn sobel_edge(image: &Image) -> EdgeMap {
    let g = Graph::new();
    let k = g.constant(gx_kernel());
    let gray = image.grayscale();
    let gx = g
        .constant(gray.clone())
        .conv2d(&k, 1)
        .expect("3x3 on [1, H, W]")
        .value();
    let gy_t = g
        .constant(transpose_plane(&gray))
        .conv2d(&k, 1)
        .expect("3x3 on [1, W, H]")
        .value();
    let gy = transpose_plane(&gy_t);
    let values = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(x, y)| ((x * x + y * y).sqrt() / EDGE_NORMALIZER).min(1.0))
        .collect();
    EdgeMap::new(image.height(), image.width(), values).expect("dims preserved")
}

/// Max-pools `edge` down to each requested `(h, w)`; every target must be
/// the source size divided by the same power of two on both axes.
pub fn build_edge_pyramid(edge: &EdgeMap, scale_dims: &[(usize, usize)]) -> Result<Vec<EdgeMap>> {
    scale_dims
        .iter()
        .map(|&(h, w)| {
            let bad = || {
                Error::InvalidArgument(format!(
                    "edge pyramid level {h}x{w} is not a power-of-two reduction of {}x{}",
                    edge.height(),
                    edge.width()
                ))
            };
            if h == 0 || w == 0 || !edge.height().is_multiple_of(h) || !edge.width().is_multiple_of(w) {
                return Err(bad());
            }
            let factor = edge.height() / h;
            if factor != edge.width() / w || !factor.is_power_of_two() {
                return Err(bad());
            }
            let (mut ch, mut cw) = edge.dims();
            let mut values = edge.values().to_vec();
            while ch > h {
                values = kernels::maxpool2x(&values, 1, ch, cw).0;
                ch /= 2;
                cw /= 2;
            }
            EdgeMap::new(h, w, values)
        })
        .collect()
}
