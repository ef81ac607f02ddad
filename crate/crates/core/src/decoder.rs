//! Query-driven decoding: `T` rounds of cross-attention to feature tokens,
//! self-attention among queries and an MLP, followed by per-query mask and
//! class heads. Query `k` is permanently assigned to class `k`.

use crate::attention::{attend, AttentionWeights, Mlp};
use crate::backbone::to_tokens;
use crate::error::{Error, Result};
use crate::imaging::LabelMap;
use crate::params::{Bound, ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Tensor, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Channels of the feature level the decoder reads.
    pub feature_channels: usize,
    pub num_classes: usize,
    pub query_dim: usize,
    pub rounds: usize,
}

#[derive(Clone, Debug)]
pub struct DecoderRound {
    pub cross: AttentionWeights,
    pub self_attn: AttentionWeights,
    pub mlp: Mlp,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub config: DecoderConfig,
    /// `[K, d]` initial query embeddings.
    pub queries: ParamId,
    /// `[C, d]` token projection.
    pub zproj: ParamId,
    pub rounds: Vec<DecoderRound>,
    /// `[d, d]`
    pub w3: ParamId,
    /// `[d, C, 1, 1]` pixel embedding.
    pub pixel: ParamId,
    /// `[d, C_cls]`
    pub cls_w: ParamId,
    /// `[C_cls]`
    pub cls_b: ParamId,
}

impl Decoder {
    pub fn init(store: &mut ParamStore, config: &DecoderConfig, rng: &mut SplitMix64) -> Result<Self> {
        if config.rounds == 0 {
            return Err(Error::config("decoder_rounds", "must be at least 1"));
        }
        if config.num_classes < 2 {
            return Err(Error::config("num_classes", "must be at least 2"));
        }
        if config.query_dim == 0 {
            return Err(Error::config("query_dim", "must be positive"));
        }
        let (c, d, k) = (config.feature_channels, config.query_dim, config.num_classes);
        let queries = store.add("queries.init", Tensor::uniform([k, d], 1.0, rng));
        let zproj = store.add("decoder.zproj", Tensor::glorot([c, d], c, d, rng));
        let rounds = (1..=config.rounds)
            .map(|t| {
                let prefix = format!("decoder.round{t}");
                DecoderRound {
                    cross: AttentionWeights::init(store, &format!("{prefix}.cross"), d, rng),
                    self_attn: AttentionWeights::init(store, &format!("{prefix}.self"), d, rng),
                    mlp: Mlp::init(store, &format!("{prefix}.mlp"), d, rng),
                }
            })
            .collect();
        let w3 = store.add("maskhead.w3", Tensor::glorot([d, d], d, d, rng));
        let pixel = store.add("maskhead.pixel", Tensor::glorot([d, c, 1, 1], c, d, rng));
        let cls_w = store.add("clshead.w", Tensor::glorot([d, k], d, k, rng));
        let cls_b = store.add("clshead.b", Tensor::zeros([k]));
        Ok(Self {
            config: config.clone(),
            queries,
            zproj,
            rounds,
            w3,
            pixel,
            cls_w,
            cls_b,
        })
    }
}

/// `[C, H, W]` features to `[H·W, d]` decoder tokens.
pub fn project_tokens<'g>(features: &Var<'g>, dec: &Decoder, p: &Bound<'g>) -> Result<Var<'g>> {
    to_tokens(features)?.matmul(&p[dec.zproj])
}

/// One decoding round: cross-attention to `z`, self-attention over the
/// queries and an MLP, each with a residual connection.
pub fn decode_step<'g>(q: &Var<'g>, z: &Var<'g>, round: &DecoderRound, p: &Bound<'g>) -> Result<Var<'g>> {
    let d = round.cross.width;
    if q.shape().get(1) != Some(&d) || z.shape().get(1) != Some(&d) {
        return Err(Error::ShapeMismatch {
            op: "decode_step",
            lhs: q.shape(),
            rhs: z.shape(),
        });
    }
    let q = q.add(&attend(q, z, &round.cross, p)?.output)?;
    let q = q.add(&attend(&q, &q, &round.self_attn, p)?.output)?;
    q.add(&round.mlp.forward(&q, p)?)
}

/// Runs every round starting from the learned `Q(0)`.
pub fn decode<'g>(z: &Var<'g>, dec: &Decoder, p: &Bound<'g>) -> Result<Var<'g>> {
    let mut q = p[dec.queries];
    for round in &dec.rounds {
        q = decode_step(&q, z, round, p)?;
    }
    Ok(q)
}

/// `M_k(x, y) = σ(⟨W₃·Q_k, P(x, y)⟩)` with `P` the 1×1 pixel embedding of
/// `features`. Returns `[K, H, W]` at the feature resolution.
pub fn predict_masks<'g>(q: &Var<'g>, features: &Var<'g>, dec: &Decoder, p: &Bound<'g>) -> Result<Var<'g>> {
    let emb = q.matmul(&p[dec.w3].transpose()?)?;
    let pixels = features.conv2d(&p[dec.pixel], 1)?;
    mask_logits(&emb, &pixels).map(|v| v.sigmoid())
}

/// `[K, d]` query embeddings against `[d, H, W]` pixel embeddings.
pub fn mask_logits<'g>(emb: &Var<'g>, pixels: &Var<'g>) -> Result<Var<'g>> {
    let s = pixels.shape();
    if s.len() != 3 {
        return Err(Error::InvalidShape {
            op: "mask_logits",
            shape: s,
            reason: "expected [d, H, W]".into(),
        });
    }
    let k = emb.shape()[0];
    emb.matmul(&pixels.reshape([s[0], s[1] * s[2]])?)?
        .reshape([k, s[1], s[2]])
}

/// `softmax(Q W_c + b_c)`, one probability row per query.
pub fn predict_classes<'g>(q: &Var<'g>, dec: &Decoder, p: &Bound<'g>) -> Result<Var<'g>> {
    Ok(q.matmul(&p[dec.cls_w])?.add_row_bias(&p[dec.cls_b])?.softmax())
}

/// Per-pixel argmax over `[K, H, W]` masks; ties go to the lowest index.
pub fn semantic_argmax(masks: &Tensor) -> Result<LabelMap> {
    let s = masks.shape();
    if s.len() != 3 || s[0] > 256 {
        return Err(Error::InvalidShape {
            op: "semantic_argmax",
            shape: s.to_vec(),
            reason: "expected [K, H, W] with K <= 256".into(),
        });
    }
    let (k, hw) = (s[0], s[1] * s[2]);
    let data = masks.data();
    let labels = (0..hw)
        .map(|i| {
            let mut best = 0;
            for c in 1..k {
                if data[c * hw + i] > data[best * hw + i] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(s[1], s[2], labels)
}
