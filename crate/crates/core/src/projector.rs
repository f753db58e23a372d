//! Projector networks and projector banks.
//!
//! A projector is a `784 x hidden x 1` network trained on a single projection
//! image to output 1. Its output on any other image is a similarity score in
//! (0, 1) "with respect to" that projection image. A bank of projectors maps
//! an image to one score per projection image.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::cache::Matrix;
use crate::datasets::{LabeledDataset, ProjectionImage, IMAGE_LEN};
use crate::dither::{dithered_gradient, dithered_output, DitherConfig};
use crate::error::{Error, Result};
use crate::mlp::{backprop, init_network, loss, sigmoid, Activation, LossKind, Mlp, TrainConfig};
use crate::{model_io, parallel, rng};

pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_ITERATIONS: usize = 50;
pub const DEFAULT_LEARNING_RATE: f64 = 1.0;

/// Seed domain separating training-time dither noise from projection noise.
const TRAIN_NOISE_DOMAIN: u64 = 0x7472_6169_6e00_0000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorConfig {
    pub hidden: usize,
    /// Hidden-layer activation.
    pub activation: Activation,
    /// Output-layer activation; `None` reuses `activation`.
    pub output_activation: Option<Activation>,
    /// `train.seed` is the bank's base seed.
    pub train: TrainConfig,
    /// Training-time parallel dither.
    pub dither: Option<DitherConfig>,
    /// Start every projector from the same initial weights.
    pub share_init: bool,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        ProjectorConfig {
            hidden: DEFAULT_HIDDEN,
            activation: Activation::BiasedSigmoid {
                beta: crate::mlp::DEFAULT_BETA,
            },
            output_activation: None,
            train: TrainConfig {
                learning_rate: DEFAULT_LEARNING_RATE,
                iterations: DEFAULT_ITERATIONS,
                seed: 0,
            },
            dither: None,
            share_init: false,
        }
    }
}

impl ProjectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "projector hidden width must be positive".into(),
            ));
        }
        if !self.activation.is_sigmoid() || !self.output_activation().is_sigmoid() {
            return Err(Error::InvalidConfig(
                "projector layers must use (biased) sigmoid activations".into(),
            ));
        }
        self.train.validate()?;
        if let Some(d) = &self.dither {
            d.validate()?;
        }
        Ok(())
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation.unwrap_or(self.activation)
    }

    /// Initialization seed of projector `index`.
    pub fn projector_seed(&self, index: usize) -> u64 {
        if self.share_init {
            self.train.seed
        } else {
            rng::derive_seed(self.train.seed, index as u64)
        }
    }
}

/// Trains one projector toward output 1 on `projection_image`: one SGD step
/// per iteration, squared error, dithered gradients when configured.
pub fn train_projector(projection_image: &[f64], cfg: &ProjectorConfig, seed: u64) -> Result<Mlp> {
    cfg.validate()?;
    if projection_image.len() != IMAGE_LEN {
        return Err(Error::Shape(format!(
            "projection image has {} pixels, expected {IMAGE_LEN}",
            projection_image.len()
        )));
    }
    let mut net = init_network(
        &[IMAGE_LEN, cfg.hidden, 1],
        &[cfg.activation, cfg.output_activation()],
        seed,
    )?;
    let target = [1.0];
    let noise = cfg.dither.map(|d| DitherConfig {
        seed: rng::derive_seed(d.seed, TRAIN_NOISE_DOMAIN),
        ..d
    });
    for step in 0..cfg.train.iterations {
        let grads = match &noise {
            Some(d) => dithered_gradient(
                &net,
                projection_image,
                &target,
                LossKind::SquaredError,
                d,
                rng::derive_seed(seed, step as u64),
            )?,
            None => backprop(&net, projection_image, &target, LossKind::SquaredError)?,
        };
        net.apply_gradients(&grads, cfg.train.learning_rate)?;
    }
    Ok(net)
}

/// Squared error of `net` against target 1 on `image`.
pub fn projector_loss(net: &Mlp, image: &[f64]) -> Result<f64> {
    loss(LossKind::SquaredError, &net.output(image)?, &[1.0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub net: Mlp,
    /// Identity of the projection image (CIFAR record index).
    pub image_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorBank {
    pub projectors: Vec<Projector>,
    /// Dither applied when projecting; `None` projects clean images.
    pub projection_dither: Option<DitherConfig>,
}

/// Trains one projector per image. Projector `i` is seeded from
/// `cfg.projector_seed(i)`; results do not depend on `workers`.
pub fn train_bank(
    projection_images: &[ProjectionImage],
    cfg: &ProjectorConfig,
    workers: usize,
) -> Result<ProjectorBank> {
    if projection_images.is_empty() {
        return Err(Error::InvalidConfig(
            "a projector bank needs at least one projection image".into(),
        ));
    }
    cfg.validate()?;
    let projectors = parallel::with_workers(workers, || {
        projection_images
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                Ok(Projector {
                    net: train_projector(&img.pixels, cfg, cfg.projector_seed(i))?,
                    image_id: img.id,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ProjectorBank {
        projectors,
        projection_dither: None,
    })
}

impl ProjectorBank {
    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn with_projection_dither(mut self, dither: Option<DitherConfig>) -> Self {
        self.projection_dither = dither;
        self
    }

    /// SHA-256 over the serialized networks, image ids and projection dither,
    /// truncated to 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.projectors {
            h.update(p.image_id.to_le_bytes());
            for layer in p.net.layers() {
                h.update(serde_json::to_vec(&layer.activation()).unwrap_or_default());
                for v in layer.weights().iter().chain(layer.biases()) {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.update(serde_json::to_vec(&self.projection_dither).unwrap_or_default());
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn engine(&self) -> Result<Engine<'_>> {
        Engine::new(self)
    }
}

/// Projects `image` through every projector. Stream `stream_id` keys the
/// projection dither noise.
pub fn project(bank: &ProjectorBank, image: &[f64], stream_id: u64) -> Result<Vec<f64>> {
    if image.len() != IMAGE_LEN {
        return Err(Error::Shape(format!(
            "image has {} pixels, expected {IMAGE_LEN}",
            image.len()
        )));
    }
    bank.engine()?.project(image, stream_id)
}

/// Qualitative projections of a whole dataset, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub vectors: Matrix,
    pub labels: Vec<u8>,
    pub bank_fingerprint: String,
}

impl ProjectionSet {
    pub fn len(&self) -> usize {
        self.vectors.rows
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }
}

/// Projects every image of `data`; row `j` uses stream id `j`.
pub fn project_dataset(
    bank: &ProjectorBank,
    data: &LabeledDataset,
    workers: usize,
) -> Result<ProjectionSet> {
    data.validate()?;
    let engine = bank.engine()?;
    let rows = parallel::with_workers(workers, || {
        data.images
            .par_iter()
            .enumerate()
            .map(|(j, img)| engine.project(img, j as u64))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ProjectionSet {
        vectors: Matrix {
            rows: rows.len(),
            cols: bank.len(),
            data: rows.into_iter().flatten().collect(),
        },
        labels: data.labels.clone(),
        bank_fingerprint: bank.fingerprint(),
    })
}

/// Mean output of each projector on its own projection image, and mean output
/// on the other projection images. Image `i` uses stream id `i`.
pub fn self_and_cross_similarity(
    bank: &ProjectorBank,
    images: &[ProjectionImage],
    workers: usize,
) -> Result<(f64, f64)> {
    if images.len() != bank.len() || bank.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need one projection image per projector and at least two projectors, got {} images for {}",
            images.len(),
            bank.len()
        )));
    }
    let engine = bank.engine()?;
    let rows = parallel::with_workers(workers, || {
        images
            .par_iter()
            .enumerate()
            .map(|(i, img)| engine.project(&img.pixels, i as u64))
            .collect::<Result<Vec<_>>>()
    })??;
    let n = bank.len();
    let own: f64 = (0..n).map(|i| rows[i][i]).sum::<f64>() / n as f64;
    let cross: f64 = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| rows[i][j])
        .sum::<f64>()
        / (n * (n - 1)) as f64;
    Ok((own, cross))
}

/// Evaluation strategy for a bank. Dithered projection of `784 x h x 1`
/// sigmoid projectors stacks every first layer into one matrix so all
/// replicates of an image go through a single matrix product.
struct Engine<'a> {
    bank: &'a ProjectorBank,
    stacked: Option<Stacked>,
}

struct Stacked {
    hidden: usize,
    /// `(P * hidden) x 784`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    offset1: Vec<f64>,
    /// `P x hidden`.
    w2: Vec<f64>,
    b2: Vec<f64>,
    offset2: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(bank: &'a ProjectorBank) -> Result<Self> {
        if bank.is_empty() {
            return Err(Error::InvalidConfig("empty projector bank".into()));
        }
        for p in &bank.projectors {
            if p.net.input_dim() != IMAGE_LEN || p.net.output_dim() != 1 {
                return Err(Error::Shape(format!(
                    "projector for image {} has shape {:?}",
                    p.image_id,
                    p.net.layer_sizes()
                )));
            }
        }
        if let Some(d) = &bank.projection_dither {
            d.validate()?;
        }
        let dithered = bank.projection_dither.is_some_and(|d| d.amplitude > 0.0);
        let stacked = if dithered { Stacked::build(bank) } else { None };
        Ok(Engine { bank, stacked })
    }

    fn project(&self, image: &[f64], stream_id: u64) -> Result<Vec<f64>> {
        if image.len() != IMAGE_LEN {
            return Err(Error::Shape(format!(
                "image has {} pixels, expected {IMAGE_LEN}",
                image.len()
            )));
        }
        match (&self.bank.projection_dither, &self.stacked) {
            (Some(d), Some(s)) => Ok(s.project_dithered(image, d, stream_id)),
            // Zero amplitude replicates are exact copies, so the anchored
            // dither mean equals the clean output bit for bit.
            (Some(d), None) if d.amplitude > 0.0 => self
                .bank
                .projectors
                .iter()
                .map(|p| Ok(dithered_output(&p.net, image, d, stream_id)?[0]))
                .collect(),
            _ => Ok(self
                .bank
                .projectors
                .iter()
                .map(|p| p.net.output_unchecked(image)[0])
                .collect()),
        }
    }
}

impl Stacked {
    fn build(bank: &ProjectorBank) -> Option<Self> {
        let first = &bank.projectors[0].net;
        if first.layers().len() != 2 {
            return None;
        }
        let hidden = first.layers()[0].fan_out();
        let p = bank.len();
        let mut s = Stacked {
            hidden,
            w1: Vec::with_capacity(p * hidden * IMAGE_LEN),
            b1: Vec::with_capacity(p * hidden),
            offset1: Vec::with_capacity(p),
            w2: Vec::with_capacity(p * hidden),
            b2: Vec::with_capacity(p),
            offset2: Vec::with_capacity(p),
        };
        for proj in &bank.projectors {
            let layers = proj.net.layers();
            if layers.len() != 2
                || layers[0].fan_out() != hidden
                || !layers[0].activation().is_sigmoid()
                || !layers[1].activation().is_sigmoid()
            {
                return None;
            }
            s.w1.extend_from_slice(layers[0].weights());
            s.b1.extend_from_slice(layers[0].biases());
            s.offset1.push(layers[0].activation().offset());
            s.w2.extend_from_slice(layers[1].weights());
            s.b2.push(layers[1].biases()[0]);
            s.offset2.push(layers[1].activation().offset());
        }
        Some(s)
    }

    fn project_dithered(&self, image: &[f64], d: &DitherConfig, stream_id: u64) -> Vec<f64> {
        let n = d.replicates;
        let p = self.b2.len();
        let width = p * self.hidden;
        let mut replicates = Vec::with_capacity(n * IMAGE_LEN);
        let mut buf = Vec::with_capacity(IMAGE_LEN);
        for r in 0..n {
            d.replicate_into(image, stream_id, r, &mut buf);
            replicates.extend_from_slice(&buf);
        }
        // z = replicates (n x 784) * w1^T (784 x width)
        let mut z = vec![0.0; n * width];
        unsafe {
            matrixmultiply::dgemm(
                n,
                IMAGE_LEN,
                width,
                1.0,
                replicates.as_ptr(),
                IMAGE_LEN as isize,
                1,
                self.w1.as_ptr(),
                1,
                IMAGE_LEN as isize,
                0.0,
                z.as_mut_ptr(),
                width as isize,
                1,
            );
        }
        let h = self.hidden;
        let output = |r: usize, k: usize| -> f64 {
            let zr = &z[r * width + k * h..r * width + (k + 1) * h];
            let b1 = &self.b1[k * h..(k + 1) * h];
            let w2 = &self.w2[k * h..(k + 1) * h];
            let mut acc = 0.0;
            for ((zz, b), w) in zr.iter().zip(b1).zip(w2) {
                acc += w * sigmoid(zz + b + self.offset1[k]);
            }
            sigmoid(acc + self.b2[k] + self.offset2[k])
        };
        (0..p)
            .map(|k| {
                let anchor = output(0, k);
                let mut diff = 0.0;
                for r in 1..n {
                    diff += output(r, k) - anchor;
                }
                anchor + diff / n as f64
            })
            .collect()
    }
}

/// Bank manifest written next to the per-projector model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankManifest {
    pub bank_fingerprint: String,
    pub projection_image_ids: Vec<usize>,
    pub projection_dither: Option<DitherConfig>,
    pub config: ProjectorConfig,
    /// Free-form identity of the inputs the bank was trained from, used for cache matching.
    pub cache_key: String,
}

fn projector_file(i: usize) -> String {
    format!("projector_{i:03}.json")
}

/// Writes `manifest.json` and one model file per projector into `dir`.
pub fn save_bank(
    bank: &ProjectorBank,
    config: &ProjectorConfig,
    cache_key: &str,
    dir: &Path,
) -> Result<BankManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, p) in bank.projectors.iter().enumerate() {
        model_io::save(&p.net, &dir.join(projector_file(i)))?;
    }
    let manifest = BankManifest {
        bank_fingerprint: bank.fingerprint(),
        projection_image_ids: bank.projectors.iter().map(|p| p.image_id).collect(),
        projection_dither: bank.projection_dither,
        config: *config,
        cache_key: cache_key.to_string(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<BankManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a bank written by [`save_bank`], checking its fingerprint.
pub fn load_bank(dir: &Path) -> Result<(ProjectorBank, BankManifest)> {
    let manifest = read_manifest(dir)?;
    let projectors = manifest
        .projection_image_ids
        .iter()
        .enumerate()
        .map(|(i, &image_id)| {
            Ok(Projector {
                net: model_io::load(&dir.join(projector_file(i)))?,
                image_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = ProjectorBank {
        projectors,
        projection_dither: manifest.projection_dither,
    };
    if bank.fingerprint() != manifest.bank_fingerprint {
        return Err(Error::InvalidInput(format!(
            "{}: bank fingerprint {} does not match manifest {}",
            dir.display(),
            bank.fingerprint(),
            manifest.bank_fingerprint
        )));
    }
    Ok((bank, manifest))
}
