//! Multi-scale feature extraction and per-scale transformer encoding.
//!
//! The backbone is a small convolutional stem: two stride-2 3×3
//! convolutions bring the image to 1/4 resolution, then one 3×3
//! convolution per scale (stride 1 for the first scale, stride 2 after)
//! produces `F_l` at `H / 2^(l+1)`. Every convolution is followed by the
//! sigmoid-gated activation `x · σ(x)`.
//!
//! Each scale then passes through its own single-head encoder block:
//! tokens are the `H_l · W_l` spatial positions, a fixed 2-D sinusoidal
//! encoding is added to the attention input, and both the attention and
//! MLP sublayers are residual.

use crate::attention::{attend, AttentionWeights, Mlp};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneConfig {
    pub num_scales: usize,
    pub channels: Vec<usize>,
    pub input: (usize, usize),
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            num_scales: 3,
            channels: vec![16, 32, 64],
            input: (64, 64),
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales < 2 {
            return Err(Error::config("num_scales", "must be at least 2"));
        }
        if self.channels.len() != self.num_scales {
            return Err(Error::config(
                "channels",
                format!("needs one entry per scale ({})", self.num_scales),
            ));
        }
        if self.channels.iter().any(|&c| c < 2) {
            return Err(Error::config("channels", "every width must be at least 2"));
        }
        let div = 1usize << (self.num_scales + 1);
        let (h, w) = self.input;
        if h == 0 || w == 0 || h % div != 0 || w % div != 0 {
            return Err(Error::config(
                "image_size",
                format!("{h}x{w} must be divisible by 2^(num_scales+1) = {div}"),
            ));
        }
        Ok(())
    }

    /// `(H_l, W_l) = (H, W) / 2^(l+1)` for `l = 1..=L`.
    pub fn scale_dims(&self) -> Vec<(usize, usize)> {
        (1..=self.num_scales)
            .map(|l| (self.input.0 >> (l + 1), self.input.1 >> (l + 1)))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
}

impl ConvLayer {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        stride: usize,
        rng: &mut SplitMix64,
    ) -> Self {
        let weight = store.add(
            format!("{prefix}.w"),
            Tensor::glorot([c_out, c_in, 3, 3], c_in * 9, c_out * 9, rng),
        );
        let bias = store.add(format!("{prefix}.b"), Tensor::zeros([c_out]));
        Self { weight, bias, stride }
    }

    /// Convolution, bias, then `x · σ(x)`.
    pub fn forward<'g>(&self, x: &Var<'g>, p: &Bound<'g>) -> Result<Var<'g>> {
        Ok(x.conv2d(&p[self.weight], self.stride)?
            .add_channel_bias(&p[self.bias])?
            .silu())
    }
}

#[derive(Clone, Debug)]
pub struct Backbone {
    pub config: BackboneConfig,
    pub stem: [ConvLayer; 2],
    pub levels: Vec<ConvLayer>,
}

impl Backbone {
    pub fn init(store: &mut ParamStore, config: &BackboneConfig, rng: &mut SplitMix64) -> Result<Self> {
        config.validate()?;
        let c1 = config.channels[0];
        let stem_width = (c1 / 2).max(1);
        let stem = [
            ConvLayer::init(store, "backbone.stem1", 3, stem_width, 2, rng),
            ConvLayer::init(store, "backbone.stem2", stem_width, c1, 2, rng),
        ];
        let levels = (0..config.num_scales)
            .map(|l| {
                let c_in = if l == 0 { c1 } else { config.channels[l - 1] };
                let stride = if l == 0 { 1 } else { 2 };
                ConvLayer::init(
                    store,
                    &format!("backbone.level{}", l + 1),
                    c_in,
                    config.channels[l],
                    stride,
                    rng,
                )
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            stem,
            levels,
        })
    }
}

/// Whether a pyramid holds raw backbone features or encoder outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PyramidKind {
    Raw,
    Encoded,
}

pub struct FeaturePyramid<'g> {
    pub kind: PyramidKind,
    /// `[C_l, H_l, W_l]`, finest first.
    pub levels: Vec<Var<'g>>,
}

/// Runs the stem and returns `{F_l}` for an image tensor `[3, H, W]`.
pub fn extract_features<'g>(image: &Var<'g>, backbone: &Backbone, p: &Bound<'g>) -> Result<FeaturePyramid<'g>> {
    let shape = image.shape();
    let (h, w) = backbone.config.input;
    if shape != [3, h, w] {
        return Err(Error::ShapeMismatch {
            op: "extract_features",
            lhs: shape,
            rhs: vec![3, h, w],
        });
    }
    let mut x = backbone.stem[0].forward(image, p)?;
    x = backbone.stem[1].forward(&x, p)?;
    let mut levels = Vec::with_capacity(backbone.levels.len());
    for layer in &backbone.levels {
        x = layer.forward(&x, p)?;
        levels.push(x);
    }
    Ok(FeaturePyramid {
        kind: PyramidKind::Raw,
        levels,
    })
}

/// Fixed 2-D encoding `[H·W, C]`: the sum of a 1-D sinusoidal encoding of
/// the row and of the column. Channel `2i` uses `sin(p / 10000^(2i/C))`,
/// channel `2i+1` the matching cosine.
pub fn positional_encoding(h: usize, w: usize, c: usize) -> Tensor {
    let axis = |pos: usize, ch: usize| {
        let i = (ch / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / c as f64);
        if ch.is_multiple_of(2) {
            angle.sin()
        } else {
            angle.cos()
        }
    };
    Tensor::from_fn([h * w, c], |idx| {
        let (tok, ch) = (idx / c, idx % c);
        axis(tok / w, ch) + axis(tok % w, ch)
    })
}

#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub width: usize,
    pub attention: AttentionWeights,
    pub mlp: Mlp,
    pub positional: bool,
}

impl EncoderBlock {
    pub fn init(store: &mut ParamStore, prefix: &str, width: usize, rng: &mut SplitMix64) -> Self {
        Self {
            width,
            attention: AttentionWeights::init(store, &format!("{prefix}.attn"), width, rng),
            mlp: Mlp::init(store, &format!("{prefix}.mlp"), width, rng),
            positional: true,
        }
    }
}

/// `[C, H, W] -> [H·W, C]`
pub fn to_tokens<'g>(x: &Var<'g>) -> Result<Var<'g>> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(Error::InvalidShape {
            op: "to_tokens",
            shape: s,
            reason: "expected [C, H, W]".into(),
        });
    }
    x.reshape([s[0], s[1] * s[2]])?.transpose()
}

/// `[H·W, C] -> [C, H, W]`
pub fn from_tokens<'g>(tokens: &Var<'g>, h: usize, w: usize) -> Result<Var<'g>> {
    let t = tokens.transpose()?;
    let c = t.shape()[0];
    t.reshape([c, h, w])
}

/// `Z_l = TransformerEncoder(F_l)`: self-attention over spatial tokens and
/// an MLP, both with residual connections.
pub fn encode_scale<'g>(features: &Var<'g>, block: &EncoderBlock, p: &Bound<'g>) -> Result<Var<'g>> {
    let s = features.shape();
    if s.len() != 3 || s[0] != block.width {
        return Err(Error::ShapeMismatch {
            op: "encode_scale",
            lhs: s,
            rhs: vec![block.width],
        });
    }
    let (h, w) = (s[1], s[2]);
    let tokens = to_tokens(features)?;
    let attn_in = if block.positional {
        let pe = features.graph().constant(positional_encoding(h, w, block.width));
        tokens.add(&pe)?
    } else {
        tokens
    };
    let attended = attend(&attn_in, &attn_in, &block.attention, p)?;
    let hidden = tokens.add(&attended.output)?;
    let out = hidden.add(&block.mlp.forward(&hidden, p)?)?;
    from_tokens(&out, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Graph;

    fn setup(config: &BackboneConfig) -> (ParamStore, Backbone) {
        let mut store = ParamStore::new();
        let bb = Backbone::init(&mut store, config, &mut SplitMix64::new(1)).unwrap();
        (store, bb)
    }

    #[test]
    fn default_scale_dims() {
        let (store, bb) = setup(&BackboneConfig::default());
        let g = Graph::new();
        let p = store.bind(&g);
        let img = g.constant(Tensor::full([3, 64, 64], 0.5));
        let pyr = extract_features(&img, &bb, &p).unwrap();
        let shapes: Vec<_> = pyr.levels.iter().map(|v| v.shape()).collect();
        assert_eq!(shapes, vec![vec![16, 16, 16], vec![32, 8, 8], vec![64, 4, 4]]);
        assert_eq!(pyr.kind, PyramidKind::Raw);
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let (mut store, bb) = setup(&BackboneConfig::default());
        store.zero_prefix("backbone.");
        let g = Graph::new();
        let p = store.bind(&g);
        let img = g.constant(Tensor::full([3, 64, 64], 0.8));
        let pyr = extract_features(&img, &bb, &p).unwrap();
        for level in pyr.levels {
            assert!(level.value().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_wrong_image_size_and_bad_configs() {
        let (store, bb) = setup(&BackboneConfig::default());
        let g = Graph::new();
        let p = store.bind(&g);
        assert!(extract_features(&g.constant(Tensor::zeros([3, 32, 32])), &bb, &p).is_err());
        let bad = BackboneConfig {
            input: (40, 40),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let one = BackboneConfig {
            num_scales: 1,
            channels: vec![8],
            input: (16, 16),
        };
        assert!(one.validate().is_err());
    }

    fn block(width: usize, seed: u64) -> (ParamStore, EncoderBlock) {
        let mut store = ParamStore::new();
        let b = EncoderBlock::init(&mut store, "encoder.l1", width, &mut SplitMix64::new(seed));
        (store, b)
    }

    #[test]
    fn zeroed_encoder_is_identity() {
        let (mut store, b) = block(8, 2);
        store.zero_prefix("encoder.");
        let g = Graph::new();
        let p = store.bind(&g);
        let f = g.constant(Tensor::uniform([8, 4, 4], 3.0, &mut SplitMix64::new(3)));
        let z = encode_scale(&f, &b, &p).unwrap();
        assert_eq!(z.value(), f.value());
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let (store, b) = block(8, 2);
        let g = Graph::new();
        let p = store.bind(&g);
        let f = g.constant(Tensor::zeros([6, 4, 4]));
        assert!(encode_scale(&f, &b, &p).is_err());
    }

    #[test]
    fn permutation_equivariant_without_positions() {
        let (store, mut b) = block(6, 4);
        b.positional = false;
        let (c, h, w) = (6, 3, 4);
        let n = h * w;
        let x = Tensor::uniform([c, h, w], 1.0, &mut SplitMix64::new(8));
        let mut perm: Vec<usize> = (0..n).collect();
        SplitMix64::new(9).shuffle(&mut perm);
        let permuted = Tensor::from_fn([c, h, w], |i| x.data()[(i / n) * n + perm[i % n]]);

        let run = |input: Tensor| {
            let g = Graph::new();
            let p = store.bind(&g);
            encode_scale(&g.constant(input), &b, &p).unwrap().value()
        };
        let base = run(x);
        let moved = run(permuted);
        for ch in 0..c {
            for (t, &src) in perm.iter().enumerate() {
                let a = base.data()[ch * n + src];
                let b = moved.data()[ch * n + t];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positional_encoding_shape_and_range() {
        let pe = positional_encoding(4, 5, 8);
        assert_eq!(pe.shape(), &[20, 8]);
        assert!(pe.data().iter().all(|v| v.abs() <= 2.0));
        // Token (0, 0): sin(0) + sin(0) = 0 and cos(0) + cos(0) = 2.
        assert_eq!(&pe.data()[..2], &[0.0, 2.0]);
    }
}
