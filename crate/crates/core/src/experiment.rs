//! The three-way regularization comparison.
//!
//! Three projector configurations are compared on identical inputs:
//!
//! | variant         | projector activation | training dither | projection dither |
//! |-----------------|----------------------|-----------------|-------------------|
//! | `plain`         | plain sigmoid        | off             | off               |
//! | `biased`        | biased sigmoid       | off             | off               |
//! | `biased_dither` | biased sigmoid       | on              | on                |
//!
//! Each variant trains a projector bank on the same CIFAR projection images,
//! projects the same MNIST train/test splits, and trains a classifier from the
//! same initial weights. The output is one test-error curve per variant.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{self, train_classifier, ClassifierConfig, ErrorCurve};
use crate::datasets::cache::{self, Matrix};
use crate::datasets::fetch::DataSources;
use crate::datasets::{
    load_cifar10, load_mnist, select_projection_images, select_training_subset, LabeledDataset,
    ProjectionImage,
};
use crate::dither::DitherConfig;
use crate::error::{Error, Result};
use crate::mlp::{Activation, TrainConfig};
use crate::projector::{
    load_bank, project_dataset, read_manifest, save_bank, self_and_cross_similarity, train_bank,
    ProjectionSet, ProjectorBank, ProjectorConfig,
};

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "QUALPROJ_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Biased,
    BiasedDither,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Plain, Variant::Biased, Variant::BiasedDither];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Biased => "biased",
            Variant::BiasedDither => "biased_dither",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {name:?}")))
    }

    pub fn spec(&self, cfg: &ExperimentConfig) -> VariantSpec {
        let biased = Activation::BiasedSigmoid { beta: cfg.beta };
        let (activation, dithered) = match self {
            Variant::Plain => (Activation::PlainSigmoid, false),
            Variant::Biased => (biased, false),
            Variant::BiasedDither => (biased, true),
        };
        let output_activation = match (self, cfg.projector.output_biased) {
            (Variant::Plain, _) | (_, true) => None,
            (_, false) => Some(Activation::PlainSigmoid),
        };
        let dither = dithered.then(|| cfg.dither_config());
        VariantSpec {
            variant: *self,
            projector: ProjectorConfig {
                hidden: cfg.projector.hidden,
                activation,
                output_activation,
                train: TrainConfig {
                    learning_rate: cfg.projector.learning_rate,
                    iterations: cfg.projector.iterations,
                    seed: cfg.seeds.bank_base,
                },
                dither,
                share_init: cfg.projector.share_init,
            },
            projection_dither: dither,
        }
    }
}

/// Fully resolved settings of one variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariantSpec {
    pub variant: Variant,
    pub projector: ProjectorConfig,
    pub projection_dither: Option<DitherConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the raw files; falls back to `$QUALPROJ_DATA_DIR`, then `data`.
    pub data_dir: Option<PathBuf>,
    pub mnist_train_images: String,
    pub mnist_train_labels: String,
    pub mnist_test_images: String,
    pub mnist_test_labels: String,
    /// CIFAR-10 batches the projection images are drawn from.
    pub cifar_batches: Vec<String>,
    pub sources: DataSources,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            data_dir: None,
            mnist_train_images: "train-images-idx3-ubyte".into(),
            mnist_train_labels: "train-labels-idx1-ubyte".into(),
            mnist_test_images: "t10k-images-idx3-ubyte".into(),
            mnist_test_labels: "t10k-labels-idx1-ubyte".into(),
            cifar_batches: (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
            sources: DataSources::default(),
        }
    }
}

impl DataConfig {
    pub fn resolved_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub selection: u64,
    pub bank_base: u64,
    pub classifier_init: u64,
    pub dither: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            selection: 1,
            bank_base: 2,
            classifier_init: 3,
            dither: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DitherParams {
    pub replicates: usize,
    pub amplitude: f64,
}

impl Default for DitherParams {
    fn default() -> Self {
        DitherParams {
            replicates: crate::dither::DEFAULT_REPLICATES,
            amplitude: crate::dither::DEFAULT_AMPLITUDE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectorParams {
    pub hidden: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Use the biased sigmoid on the projector output layer too.
    pub output_biased: bool,
    pub share_init: bool,
}

impl Default for ProjectorParams {
    fn default() -> Self {
        ProjectorParams {
            hidden: crate::projector::DEFAULT_HIDDEN,
            iterations: crate::projector::DEFAULT_ITERATIONS,
            learning_rate: crate::projector::DEFAULT_LEARNING_RATE,
            output_biased: true,
            share_init: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub hidden: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub freeze_output_bias: bool,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            hidden: classifier::DEFAULT_HIDDEN,
            iterations: classifier::DEFAULT_ITERATIONS,
            learning_rate: 1.0,
            freeze_output_bias: false,
        }
    }
}

/// Every knob of the experiment. Defaults reproduce the reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub n_projection_images: usize,
    pub n_train: usize,
    /// Number of test images; `None` uses the whole test file.
    pub n_test: Option<usize>,
    pub seeds: Seeds,
    pub dither: DitherParams,
    /// Biased-sigmoid offset used by projectors and the classifier hidden layer.
    pub beta: f64,
    pub projector: ProjectorParams,
    pub classifier: ClassifierParams,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Reuse trained banks and projections from `<output_dir>/cache`.
    pub cache: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            n_projection_images: 100,
            n_train: 1000,
            n_test: None,
            seeds: Seeds::default(),
            dither: DitherParams::default(),
            beta: crate::mlp::DEFAULT_BETA,
            projector: ProjectorParams::default(),
            classifier: ClassifierParams::default(),
            output_dir: PathBuf::from("results"),
            workers: 1,
            cache: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_projection_images == 0 || self.n_train == 0 || self.n_test == Some(0) {
            return Err(Error::InvalidConfig(
                "dataset sizes must be positive".into(),
            ));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beta {} is not finite",
                self.beta
            )));
        }
        self.dither_config().validate()?;
        for v in Variant::ALL {
            v.spec(self).projector.validate()?;
        }
        self.classifier_config().validate()
    }

    pub fn dither_config(&self) -> DitherConfig {
        DitherConfig {
            replicates: self.dither.replicates,
            amplitude: self.dither.amplitude,
            seed: self.seeds.dither,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            hidden: self.classifier.hidden,
            hidden_activation: Activation::BiasedSigmoid { beta: self.beta },
            train: TrainConfig {
                learning_rate: self.classifier.learning_rate,
                iterations: self.classifier.iterations,
                seed: self.seeds.classifier_init,
            },
            freeze_output_bias: self.classifier.freeze_output_bias,
        }
    }

    /// Where cached artifacts of `variant` live.
    pub fn cache_dir(&self, variant: Variant) -> PathBuf {
        self.output_dir.join("cache").join(variant.name())
    }
}

/// Inputs shared by every variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub projection_images: Vec<ProjectionImage>,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Loads the raw files and applies the configured selections.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let dir = cfg.data.resolved_dir();
    let cifar_paths: Vec<PathBuf> = cfg.data.cifar_batches.iter().map(|b| dir.join(b)).collect();
    let cifar = load_cifar10(&cifar_paths)?;
    let projection_images =
        select_projection_images(&cifar, cfg.n_projection_images, cfg.seeds.selection)?;
    drop(cifar);
    let train_full = load_mnist(
        &dir.join(&cfg.data.mnist_train_images),
        &dir.join(&cfg.data.mnist_train_labels),
    )?;
    let train = select_training_subset(&train_full, cfg.n_train)?;
    drop(train_full);
    let test_full = load_mnist(
        &dir.join(&cfg.data.mnist_test_images),
        &dir.join(&cfg.data.mnist_test_labels),
    )?;
    let test = match cfg.n_test {
        Some(n) => select_training_subset(&test_full, n)?,
        None => test_full,
    };
    Ok(PreparedData {
        projection_images,
        train,
        test,
    })
}

/// Everything measured for one variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub curve: ErrorCurve,
    pub bank_fingerprint: String,
    /// Mean projector output on its own projection image.
    pub own_similarity: f64,
    /// Mean projector output on the other projection images.
    pub cross_similarity: f64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
}

fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Cache key of the bank `variant` would train on `data`.
pub fn bank_cache_key(
    variant: Variant,
    cfg: &ExperimentConfig,
    data: &PreparedData,
) -> Result<String> {
    spec_cache_key(&variant.spec(cfg), &data.projection_images)
}

fn spec_cache_key(spec: &VariantSpec, images: &[ProjectionImage]) -> Result<String> {
    let ids: Vec<usize> = images.iter().map(|p| p.id).collect();
    let mut bytes = serde_json::to_vec(&(spec, ids))?;
    for p in images {
        bytes.extend(p.pixels.iter().flat_map(|v| v.to_bits().to_le_bytes()));
    }
    Ok(digest_hex(&bytes))
}

fn dataset_key(data: &LabeledDataset) -> String {
    let mut bytes: Vec<u8> = data.labels.clone();
    bytes.extend(
        data.images
            .iter()
            .flatten()
            .flat_map(|v| v.to_bits().to_le_bytes()),
    );
    digest_hex(&bytes)
}

/// Loads the cached bank of `variant` when its key matches, else trains it
/// (and caches it when `cfg.cache` is set).
pub fn obtain_bank(
    variant: Variant,
    cfg: &ExperimentConfig,
    data: &PreparedData,
) -> Result<ProjectorBank> {
    let spec = variant.spec(cfg);
    let dir = cfg.cache_dir(variant).join("bank");
    let key = spec_cache_key(&spec, &data.projection_images)?;
    if cfg.cache {
        if let Ok(m) = read_manifest(&dir) {
            if m.cache_key == key {
                if let Ok((bank, _)) = load_bank(&dir) {
                    return Ok(bank);
                }
            }
        }
    }
    let bank = train_bank(&data.projection_images, &spec.projector, cfg.workers)?
        .with_projection_dither(spec.projection_dither);
    if cfg.cache {
        save_bank(&bank, &spec.projector, &key, &dir)?;
    }
    Ok(bank)
}

fn obtain_projections(
    bank: &ProjectorBank,
    data: &LabeledDataset,
    path: &Path,
    cfg: &ExperimentConfig,
) -> Result<ProjectionSet> {
    let key_path = path.with_extension("key");
    let key = format!("{}:{}", bank.fingerprint(), dataset_key(data));
    if cfg.cache && fs::read_to_string(&key_path).ok().as_deref() == Some(key.as_str()) {
        if let Ok((vectors, Some(labels))) = cache::read(path) {
            if vectors.cols == bank.len() && labels == data.labels {
                return Ok(ProjectionSet {
                    vectors,
                    labels,
                    bank_fingerprint: bank.fingerprint(),
                });
            }
        }
    }
    let set = project_dataset(bank, data, cfg.workers)?;
    if cfg.cache {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        cache::write(path, &set.vectors, Some(&set.labels))?;
        fs::write(&key_path, key).map_err(|e| Error::io(&key_path, e))?;
    }
    Ok(set)
}

/// Runs one variant end to end: bank, projections, classifier.
pub fn run_variant(
    variant: Variant,
    cfg: &ExperimentConfig,
    data: &PreparedData,
) -> Result<VariantReport> {
    run_variant_inner(variant, cfg, data).map_err(|e| e.in_variant(variant.name()))
}

fn run_variant_inner(
    variant: Variant,
    cfg: &ExperimentConfig,
    data: &PreparedData,
) -> Result<VariantReport> {
    let bank = obtain_bank(variant, cfg, data)?;
    let cache_dir = cfg.cache_dir(variant);
    let train = obtain_projections(&bank, &data.train, &cache_dir.join("train.qpds"), cfg)?;
    let test = obtain_projections(&bank, &data.test, &cache_dir.join("test.qpds"), cfg)?;
    let (own_similarity, cross_similarity) = if bank.len() >= 2 {
        self_and_cross_similarity(&bank, &data.projection_images, cfg.workers)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let ccfg = cfg.classifier_config();
    let initial_train_loss = classifier::mean_loss(&ccfg.initial_network(train.dim())?, &train)?;
    let (net, curve) = train_classifier(&train, &test, &ccfg, variant.name(), cfg.workers)?;
    let final_train_loss = classifier::mean_loss(&net, &train)?;
    Ok(VariantReport {
        curve,
        bank_fingerprint: bank.fingerprint(),
        own_similarity,
        cross_similarity,
        initial_train_loss,
        final_train_loss,
    })
}

/// CSV with header `iteration,<name>,...` and values at 6 decimal places.
pub fn curves_csv(curves: &[ErrorCurve]) -> Result<String> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidInput("no curves to write".into()));
    };
    let len = first.errors.len();
    if let Some(c) = curves.iter().find(|c| c.errors.len() != len) {
        return Err(Error::InvalidInput(format!(
            "curve {} has {} points, expected {len}",
            c.variant_name,
            c.errors.len()
        )));
    }
    let mut out = String::from("iteration");
    for c in curves {
        out.push(',');
        out.push_str(&c.variant_name);
    }
    out.push('\n');
    for i in 0..len {
        let _ = write!(out, "{}", i + 1);
        for c in curves {
            let _ = write!(out, ",{:.6}", c.errors[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_curves_csv(curves: &[ErrorCurve], path: &Path) -> Result<()> {
    let text = curves_csv(curves)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub final_error: f64,
    pub min_error: f64,
    pub iterations: usize,
}

/// Result of [`run_figure3`].
#[derive(Debug, Clone, PartialEq)]
pub struct Figure3 {
    pub reports: Vec<VariantReport>,
}

impl Figure3 {
    pub fn curves(&self) -> Vec<ErrorCurve> {
        self.reports.iter().map(|r| r.curve.clone()).collect()
    }

    pub fn report(&self, variant: Variant) -> Option<&VariantReport> {
        self.reports
            .iter()
            .find(|r| r.curve.variant_name == variant.name())
    }

    pub fn summary(&self) -> serde_json::Map<String, serde_json::Value> {
        self.reports
            .iter()
            .map(|r| {
                let entry = SummaryEntry {
                    final_error: r.curve.final_error().unwrap_or(f64::NAN),
                    min_error: r.curve.min_error().unwrap_or(f64::NAN),
                    iterations: r.curve.errors.len(),
                };
                (
                    r.curve.variant_name.clone(),
                    serde_json::to_value(entry).unwrap_or_default(),
                )
            })
            .collect()
    }

    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self
            .reports
            .iter()
            .map(|r| {
                format!(
                    "{}={:.4} (min {:.4})",
                    r.curve.variant_name,
                    r.curve.final_error().unwrap_or(f64::NAN),
                    r.curve.min_error().unwrap_or(f64::NAN)
                )
            })
            .collect();
        format!("final test error: {}", parts.join(", "))
    }
}

/// Runs the three variants and writes `curve_<variant>.csv`, `figure3.csv`,
/// `summary.json` and `diagnostics.json` into `cfg.output_dir`.
pub fn run_figure3(cfg: &ExperimentConfig) -> Result<Figure3> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    run_figure3_on(cfg, &data)
}

pub fn run_figure3_on(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Figure3> {
    cfg.validate()?;
    let reports = Variant::ALL
        .iter()
        .map(|&v| run_variant(v, cfg, data))
        .collect::<Result<Vec<_>>>()?;
    let fig = Figure3 { reports };
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for r in &fig.reports {
        r.curve
            .write_csv(&out.join(format!("curve_{}.csv", r.curve.variant_name)))?;
    }
    write_curves_csv(&fig.curves(), &out.join("figure3.csv"))?;
    let summary = out.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&fig.summary())?)
        .map_err(|e| Error::io(&summary, e))?;
    let diag = out.join("diagnostics.json");
    let diagnostics: Vec<serde_json::Value> = fig
        .reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "variant": r.curve.variant_name,
                "bank_fingerprint": r.bank_fingerprint,
                "own_similarity": r.own_similarity,
                "cross_similarity": r.cross_similarity,
                "initial_train_loss": r.initial_train_loss,
                "final_train_loss": r.final_train_loss,
            })
        })
        .collect();
    fs::write(&diag, serde_json::to_string_pretty(&diagnostics)?)
        .map_err(|e| Error::io(&diag, e))?;
    Ok(fig)
}

/// Builds a [`ProjectionSet`] from a cached QPDS file pair.
pub fn read_projection_set(path: &Path) -> Result<ProjectionSet> {
    let (vectors, labels): (Matrix, _) = cache::read(path)?;
    let labels = labels
        .ok_or_else(|| Error::InvalidInput(format!("{} has no labels sidecar", path.display())))?;
    Ok(ProjectionSet {
        vectors,
        labels,
        bank_fingerprint: String::new(),
    })
}
