//! JSON run configuration shared by every command line subcommand.
//!
//! All keys are optional; missing keys take the defaults below. Unknown
//! keys are rejected with an error naming the key.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 0 | dataset and training seed |
//! | `image_size` | 64 | square side, or `[height, width]` |
//! | `num_classes` | 4 | segmentation classes (the synthetic scenes use 4) |
//! | `num_scales` | 3 | backbone scales |
//! | `channels` | `[16, 32, 64]` | channels per scale |
//! | `queries` | 4 | decoder queries, one per class |
//! | `query_dim` | 32 | query width |
//! | `decoder_rounds` | 2 | decoding rounds |
//! | `lambda1`, `lambda2`, `lambda3` | 1.0, 1.0, 0.1 | loss weights |
//! | `lr` | 0.001 | Adam learning rate |
//! | `lr_decay` | null | `{"every_epochs": n, "gamma": g}` step decay |
//! | `grad_clip` | 10.0 | global gradient-norm ceiling, null disables |
//! | `augment` | true | random scale-and-crop during training |
//! | `epochs` | 30 | training epochs |
//! | `batch_size` | 8 | samples per optimizer step |
//! | `train_size`, `val_size`, `test_size` | 200, 50, 50 | dataset split sizes |
//! | `data_dir` | `"data"` | dataset directory |
//! | `out_dir` | `"runs"` | training outputs |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetConfig, SceneSpec, CLASS_NAMES};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::ModelConfig;
use crate::training::{LrDecay, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageSize {
    Square(usize),
    Rect([usize; 2]),
}

impl ImageSize {
    pub fn dims(self) -> (usize, usize) {
        match self {
            ImageSize::Square(s) => (s, s),
            ImageSize::Rect([h, w]) => (h, w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub image_size: ImageSize,
    pub num_classes: usize,
    pub num_scales: usize,
    pub channels: Vec<usize>,
    pub queries: usize,
    pub query_dim: usize,
    pub decoder_rounds: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lr: f64,
    pub lr_decay: Option<LrDecay>,
    pub grad_clip: Option<f64>,
    pub augment: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let data = DatasetConfig::default();
        Self {
            seed: 0,
            image_size: ImageSize::Square(model.image_size.0),
            num_classes: model.num_classes,
            num_scales: model.num_scales,
            channels: model.channels,
            queries: model.num_classes,
            query_dim: model.query_dim,
            decoder_rounds: model.decoder_rounds,
            lambda1: train.weights.lambda1,
            lambda2: train.weights.lambda2,
            lambda3: train.weights.lambda3,
            lr: train.lr,
            lr_decay: train.lr_decay,
            grad_clip: train.grad_clip,
            augment: train.augment,
            epochs: train.epochs,
            batch_size: train.batch_size,
            train_size: data.train,
            val_size: data.val,
            test_size: data.test,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "image_size",
    "num_classes",
    "num_scales",
    "channels",
    "queries",
    "query_dim",
    "decoder_rounds",
    "lambda1",
    "lambda2",
    "lambda3",
    "lr",
    "lr_decay",
    "grad_clip",
    "augment",
    "epochs",
    "batch_size",
    "train_size",
    "val_size",
    "test_size",
    "data_dir",
    "out_dir",
];

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let object = value
            .as_object()
            .ok_or_else(|| Error::config("<root>", "configuration must be a JSON object"))?;
        if let Some(key) = object.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(key.as_str(), "unknown key"));
        }
        for (key, v) in object {
            let mut probe = serde_json::Map::new();
            probe.insert(key.clone(), v.clone());
            serde_json::from_value::<RunConfig>(serde_json::Value::Object(probe))
                .map_err(|e| Error::config(key.as_str(), e.to_string()))?;
        }
        let config: RunConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries != self.num_classes {
            return Err(Error::config(
                "queries",
                "must equal num_classes (query k predicts class k)",
            ));
        }
        if self.num_classes != CLASS_NAMES.len() {
            return Err(Error::config(
                "num_classes",
                format!("the synthetic scenes have {} classes", CLASS_NAMES.len()),
            ));
        }
        self.model_config().validate()?;
        self.train_config().validate()?;
        self.dataset_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            image_size: self.image_size.dims(),
            num_classes: self.num_classes,
            num_scales: self.num_scales,
            channels: self.channels.clone(),
            query_dim: self.query_dim,
            decoder_rounds: self.decoder_rounds,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            lr_decay: self.lr_decay,
            grad_clip: self.grad_clip,
            weights: LossWeights {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
                lambda3: self.lambda3,
            },
            augment: self.augment,
            validate: true,
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let (height, width) = self.image_size.dims();
        DatasetConfig {
            seed: self.seed,
            train: self.train_size,
            val: self.val_size,
            test: self.test_size,
            scene: SceneSpec {
                height,
                width,
                ..SceneSpec::default()
            },
        }
    }
}
