//! Seeded synthetic street-like scenes: a noisy background with a
//! horizontal road band, box buildings and small discs drawn in that order,
//! so later shapes occlude earlier ones.
//!
//! Class 0 is background, 1 road band, 2 box building, 3 small disc.
//! Every scene, and therefore every dataset, is a pure function of the seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::pnm::{read_label_map, read_ppm, write_label_map, write_ppm};
use crate::imaging::{Image, LabelMap, Sample};
use crate::rng::SplitMix64;

pub const BACKGROUND: u8 = 0;
pub const ROAD: u8 = 1;
pub const BUILDING: u8 = 2;
pub const DISC: u8 = 3;
pub const CLASS_NAMES: [&str; 4] = ["background", "road-band", "box-building", "small-disc"];
pub const MANIFEST_NAME: &str = "manifest.tsv";

/// Base RGB per class; instances jitter around it.
const BASE_COLORS: [[f64; 3]; 4] = [
    [0.45, 0.50, 0.45],
    [0.25, 0.25, 0.30],
    [0.70, 0.35, 0.25],
    [0.90, 0.85, 0.20],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    /// Inclusive instance-count ranges.
    pub road_bands: (usize, usize),
    pub boxes: (usize, usize),
    pub discs: (usize, usize),
    /// Inclusive disc radius range in pixels.
    pub disc_radius: (usize, usize),
    /// Amplitude of the per-pixel uniform noise.
    pub noise: f64,
    /// Amplitude of the per-instance color jitter.
    pub color_jitter: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            road_bands: (1, 1),
            boxes: (1, 2),
            discs: (2, 4),
            disc_radius: (2, 5),
            noise: 0.04,
            color_jitter: 0.08,
        }
    }
}

impl SceneSpec {
    pub fn num_classes(&self) -> usize {
        CLASS_NAMES.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::config("image_size", "scenes need at least 8x8 pixels"));
        }
        for (key, (lo, hi)) in [
            ("road_bands", self.road_bands),
            ("boxes", self.boxes),
            ("discs", self.discs),
            ("disc_radius", self.disc_radius),
        ] {
            if lo > hi {
                return Err(Error::config(key, format!("empty range {lo}..={hi}")));
            }
        }
        if self.road_bands.1 + self.boxes.1 + self.discs.1 == 0 {
            return Err(Error::config("discs", "every scene needs at least one instance"));
        }
        if self.disc_radius.0 == 0 {
            return Err(Error::config("disc_radius", "radius must be at least 1"));
        }
        if !(0.0..=0.5).contains(&self.noise) || !(0.0..=0.5).contains(&self.color_jitter) {
            return Err(Error::config("noise", "noise and jitter must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

struct Canvas {
    image: Image,
    labels: LabelMap,
}

impl Canvas {
    fn paint(&mut self, row: usize, col: usize, class: u8, color: [f64; 3], rng: &mut SplitMix64, noise: f64) {
        for (ch, &c) in color.iter().enumerate() {
            self.image.set(ch, row, col, c + rng.uniform(-noise, noise));
        }
        self.labels.set(row, col, class);
    }
}

fn instance_color(class: u8, rng: &mut SplitMix64, jitter: f64) -> [f64; 3] {
    BASE_COLORS[class as usize].map(|c| c + rng.uniform(-jitter, jitter))
}

fn draw_scene(spec: &SceneSpec, rng: &mut SplitMix64) -> Result<(Canvas, [bool; 4])> {
    let (h, w) = (spec.height, spec.width);
    let mut canvas = Canvas {
        image: Image::filled(h, w, [0.0; 3])?,
        labels: LabelMap::filled(h, w, BACKGROUND),
    };
    let background = instance_color(BACKGROUND, rng, spec.color_jitter);
    for r in 0..h {
        for c in 0..w {
            canvas.paint(r, c, BACKGROUND, background, rng, spec.noise);
        }
    }
    let mut drawn = [false; 4];

    let bands = rng.range_inclusive(spec.road_bands.0, spec.road_bands.1);
    for _ in 0..bands {
        let thickness = rng.range_inclusive((h / 8).max(1), (h / 4).max(1));
        let top = rng.range_inclusive(0, h - thickness);
        let color = instance_color(ROAD, rng, spec.color_jitter);
        for r in top..top + thickness {
            for c in 0..w {
                canvas.paint(r, c, ROAD, color, rng, spec.noise);
            }
        }
        drawn[ROAD as usize] = true;
    }

    let boxes = rng.range_inclusive(spec.boxes.0, spec.boxes.1);
    for _ in 0..boxes {
        let bh = rng.range_inclusive((3 * h / 16).max(2), (3 * h / 8).max(2));
        let bw = rng.range_inclusive((3 * w / 16).max(2), (w / 2).max(2));
        let top = rng.range_inclusive(0, h - bh);
        let left = rng.range_inclusive(0, w - bw);
        let color = instance_color(BUILDING, rng, spec.color_jitter);
        for r in top..top + bh {
            for c in left..left + bw {
                canvas.paint(r, c, BUILDING, color, rng, spec.noise);
            }
        }
        drawn[BUILDING as usize] = true;
    }

    let discs = rng.range_inclusive(spec.discs.0, spec.discs.1);
    for _ in 0..discs {
        let radius = rng.range_inclusive(spec.disc_radius.0, spec.disc_radius.1) as i64;
        let cy = rng.range_inclusive(0, h - 1) as i64;
        let cx = rng.range_inclusive(0, w - 1) as i64;
        let color = instance_color(DISC, rng, spec.color_jitter);
        for r in (cy - radius).max(0)..=(cy + radius).min(h as i64 - 1) {
            for c in (cx - radius).max(0)..=(cx + radius).min(w as i64 - 1) {
                if (r - cy).pow(2) + (c - cx).pow(2) <= radius * radius {
                    canvas.paint(r as usize, c as usize, DISC, color, rng, spec.noise);
                }
            }
        }
        drawn[DISC as usize] = true;
    }
    Ok((canvas, drawn))
}

/// Draws one scene. If an instantiated class ends up fully occluded the
/// scene is redrawn from the continuing stream, so every drawn class keeps
/// at least one pixel. The image is quantized to 8 bits so that it
/// survives a round trip through disk unchanged.
pub fn generate_scene(spec: &SceneSpec, rng: &mut SplitMix64, id: impl Into<String>) -> Result<Sample> {
    spec.validate()?;
    loop {
        let (canvas, drawn) = draw_scene(spec, rng)?;
        let hist = canvas.labels.histogram(CLASS_NAMES.len());
        let complete = drawn.iter().zip(&hist).all(|(&d, &n)| !d || n > 0);
        if complete && hist[1..].iter().any(|&n| n > 0) {
            return Sample::new(id, canvas.image.quantized(), canvas.labels);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!(
                "unknown split `{other}` (expected train, val or test)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub scene: SceneSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train: 200,
            val: 50,
            test: 50,
            scene: SceneSpec::default(),
        }
    }
}

impl DatasetConfig {
    pub fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for split in Split::ALL {
            if self.size(split) == 0 {
                return Err(Error::config(
                    format!("{split}_size"),
                    "every split needs at least one sample",
                ));
            }
        }
        self.scene.validate()
    }

    /// Sample `index` of `split`, drawn from its own stream
    /// `fork(split).fork(index)` of the dataset seed.
    pub fn sample(&self, split: Split, index: usize) -> Result<Sample> {
        let mut rng = SplitMix64::new(self.seed).fork(split.stream()).fork(index as u64);
        generate_scene(&self.scene, &mut rng, format!("{split}/{index:04}"))
    }

    /// Every sample of one split, in index order, without touching disk.
    pub fn generate_split(&self, split: Split) -> Result<Vec<Sample>> {
        (0..self.size(split)).map(|i| self.sample(split, i)).collect()
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        Ok(Dataset {
            train: self.generate_split(Split::Train)?,
            val: self.generate_split(Split::Val)?,
            test: self.generate_split(Split::Test)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub split: Split,
    /// Relative to the manifest's directory.
    pub image: PathBuf,
    pub label: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<Sample> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes every split as `split/NNNN.ppm` + `split/NNNN_label.pgm` under
/// `out_dir` plus a tab-separated manifest. Returns the manifest path.
pub fn generate_dataset(config: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    let mut manifest = String::new();
    for split in Split::ALL {
        let dir = out_dir.join(split.as_str());
        create_dir(&dir)?;
        for index in 0..config.size(split) {
            let sample = config.sample(split, index)?;
            let image = PathBuf::from(split.as_str()).join(format!("{index:04}.ppm"));
            let label = PathBuf::from(split.as_str()).join(format!("{index:04}_label.pgm"));
            write_ppm(out_dir.join(&image), &sample.image)?;
            write_label_map(out_dir.join(&label), &sample.labels)?;
            manifest.push_str(&format!("{split}\t{}\t{}\n", image.display(), label.display()));
        }
    }
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let split = fields[0].parse().map_err(|e: Error| Error::Manifest {
                line: i + 1,
                reason: e.to_string(),
            })?;
            Ok(ManifestEntry {
                split,
                image: PathBuf::from(fields[1]),
                label: PathBuf::from(fields[2]),
            })
        })
        .collect()
}

/// Loads every sample listed in a manifest, validating dims and the class
/// alphabet. Errors name the offending file.
pub fn load_dataset(manifest: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(manifest.to_path_buf())
        } else {
            Error::io(manifest, e)
        }
    })?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let mut dataset = Dataset::default();
    for entry in parse_manifest(&text)? {
        let image_path = root.join(&entry.image);
        let label_path = root.join(&entry.label);
        let image = read_ppm(&image_path)?;
        let labels = read_label_map(&label_path)?;
        if image.dims() != labels.dims() {
            return Err(Error::DimMismatch {
                image: image_path,
                label: label_path,
                image_dims: image.dims(),
                label_dims: labels.dims(),
            });
        }
        if let Some(value) = labels.first_out_of_range(num_classes) {
            return Err(Error::LabelOutOfRange {
                path: label_path,
                value,
                num_classes,
            });
        }
        let id = entry.image.with_extension("").display().to_string();
        let split = dataset.split_mut(entry.split);
        split.push(Sample::new(id, image, labels)?);
    }
    Ok(dataset)
}

/// Loads a split from `data_dir`, generating the dataset there first if no
/// manifest exists yet.
pub fn load_or_generate(config: &DatasetConfig, data_dir: impl AsRef<Path>) -> Result<Dataset> {
    let data_dir = data_dir.as_ref();
    let manifest = data_dir.join(MANIFEST_NAME);
    if !manifest.exists() {
        generate_dataset(config, data_dir)?;
    }
    load_dataset(manifest, config.scene.num_classes())
}
