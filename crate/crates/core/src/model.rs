//! The full segmentation network: backbone, per-scale encoders, bridging
//! module and query decoder over one shared parameter store.

use serde::{Deserialize, Serialize};

use crate::backbone::{encode_scale, extract_features, Backbone, BackboneConfig, EncoderBlock};
use crate::befbm::{boundary_maps, build_bridged_pyramid, Befbm, BridgedPyramid};
use crate::decoder::{decode, predict_classes, predict_masks, project_tokens, semantic_argmax, Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::imaging::{Image, LabelMap};
use crate::losses::{sample_loss, LossTerms, LossWeights};
use crate::params::{Bound, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_size: (usize, usize),
    pub num_classes: usize,
    pub num_scales: usize,
    pub channels: Vec<usize>,
    pub query_dim: usize,
    pub decoder_rounds: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: (64, 64),
            num_classes: 4,
            num_scales: 3,
            channels: vec![16, 32, 64],
            query_dim: 32,
            decoder_rounds: 2,
        }
    }
}

impl ModelConfig {
    /// The reduced configuration used by gradient checks: 16×16 input, two
    /// scales, three classes and one decoding round.
    pub fn tiny() -> Self {
        Self {
            image_size: (16, 16),
            num_classes: 3,
            num_scales: 2,
            channels: vec![4, 8],
            query_dim: 8,
            decoder_rounds: 1,
        }
    }

    pub fn backbone(&self) -> BackboneConfig {
        BackboneConfig {
            num_scales: self.num_scales,
            channels: self.channels.clone(),
            input: self.image_size,
        }
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            feature_channels: self.channels.first().copied().unwrap_or(0),
            num_classes: self.num_classes,
            query_dim: self.query_dim,
            rounds: self.decoder_rounds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone().validate()?;
        if !(2..=256).contains(&self.num_classes) {
            return Err(Error::config("num_classes", "must be between 2 and 256"));
        }
        if self.query_dim == 0 {
            return Err(Error::config("query_dim", "must be positive"));
        }
        if self.decoder_rounds == 0 {
            return Err(Error::config("decoder_rounds", "must be at least 1"));
        }
        Ok(())
    }

    pub fn scale_dims(&self) -> Vec<(usize, usize)> {
        self.backbone().scale_dims()
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub backbone: Backbone,
    pub encoders: Vec<EncoderBlock>,
    pub befbm: Befbm,
    pub decoder: Decoder,
}

/// Every intermediate of one forward pass.
pub struct Forward<'g> {
    pub raw: Vec<Var<'g>>,
    pub encoded: Vec<Var<'g>>,
    pub bridged: BridgedPyramid<'g>,
    /// `B_l = σ(head_l(Z_l))`, `[1, H_l, W_l]` per level.
    pub boundary: Vec<Var<'g>>,
    pub queries: Var<'g>,
    /// `[K, H_1, W_1]`
    pub masks_coarse: Var<'g>,
    /// `[K, H, W]`
    pub masks: Var<'g>,
    /// `[K, C_cls]`
    pub class_probs: Var<'g>,
}

/// Detached outputs for inference.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub labels: LabelMap,
    pub masks: Tensor,
    pub class_probs: Tensor,
    pub boundary: Vec<Tensor>,
}

impl Model {
    /// Builds a freshly initialized model; every parameter draw comes from
    /// a stream forked from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = SplitMix64::new(seed);
        let mut params = ParamStore::new();
        let backbone = Backbone::init(&mut params, &config.backbone(), &mut root.fork(1))?;
        let mut rng = root.fork(2);
        let encoders = config
            .channels
            .iter()
            .enumerate()
            .map(|(l, &c)| EncoderBlock::init(&mut params, &format!("encoder.l{}", l + 1), c, &mut rng))
            .collect();
        let befbm = Befbm::init(&mut params, &config.channels, &mut root.fork(3))?;
        let decoder = Decoder::init(&mut params, &config.decoder(), &mut root.fork(4))?;
        Ok(Self {
            config,
            params,
            backbone,
            encoders,
            befbm,
            decoder,
        })
    }

    pub fn bind<'g>(&self, graph: &'g Graph) -> Bound<'g> {
        self.params.bind(graph)
    }

    /// Forward pass for one `[3, H, W]` image.
    pub fn forward<'g>(&self, image: &Var<'g>, p: &Bound<'g>) -> Result<Forward<'g>> {
        let raw = extract_features(image, &self.backbone, p)?.levels;
        let encoded = raw
            .iter()
            .zip(&self.encoders)
            .map(|(f, block)| encode_scale(f, block, p))
            .collect::<Result<Vec<_>>>()?;
        let bridged = build_bridged_pyramid(&encoded, &self.befbm, p)?;
        let boundary = boundary_maps(&encoded, &self.befbm.boundary, p)?;
        let finest = *bridged.finest();
        let z = project_tokens(&finest, &self.decoder, p)?;
        let queries = decode(&z, &self.decoder, p)?;
        let masks_coarse = predict_masks(&queries, &finest, &self.decoder, p)?;
        let (h, w) = self.config.image_size;
        let masks = masks_coarse.upsample_to(h, w)?;
        let class_probs = predict_classes(&queries, &self.decoder, p)?;
        Ok(Forward {
            raw,
            encoded,
            bridged,
            boundary,
            queries,
            masks_coarse,
            masks,
            class_probs,
        })
    }

    pub fn predict(&self, image: &Image) -> Result<Prediction> {
        let graph = Graph::new();
        let p = self.bind(&graph);
        let x = graph.constant(image.to_tensor());
        let out = self.forward(&x, &p)?;
        let masks = out.masks.value();
        Ok(Prediction {
            labels: semantic_argmax(&masks)?,
            masks,
            class_probs: out.class_probs.value(),
            boundary: out.boundary.iter().map(Var::value).collect(),
        })
    }

    /// Forward pass plus every loss term for one training sample.
    pub fn loss<'g>(
        &self,
        image: &Var<'g>,
        p: &Bound<'g>,
        gt: &LabelMap,
        edges: &[Tensor],
        weights: &LossWeights,
    ) -> Result<(Forward<'g>, LossTerms<'g>)> {
        let out = self.forward(image, p)?;
        let terms = sample_loss(&out.class_probs, &out.masks, &out.boundary, gt, edges, weights)?;
        Ok((out, terms))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.params.save(path)
    }

    pub fn load(&mut self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.params.load(path)
    }
}
