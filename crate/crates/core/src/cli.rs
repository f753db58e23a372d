//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then the JSON file
//! given by `--config`, then individual flags.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::classifier::train_classifier;
use crate::datasets::cache;
use crate::datasets::fetch;
use crate::error::{Error, Result};
use crate::experiment::{
    self, obtain_bank, prepare_data, read_projection_set, ExperimentConfig, Variant,
};
use crate::mlp::{gradient_check_suite, GRADCHECK_TOLERANCE};
use crate::model_io;
use crate::projector::{load_bank, project_dataset, save_bank};

#[derive(Debug, Parser)]
#[command(
    name = "qualproj",
    version,
    about = "Projector banks, projections and classifier curves"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download any missing dataset files and check that they parse.
    PrepareData,
    /// Train one variant's projector bank and save it.
    TrainBank {
        #[arg(long, default_value = "biased_dither")]
        variant: String,
        /// Output directory (default: <output-dir>/cache/<variant>/bank).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project the MNIST train and test subsets through a saved bank.
    Project {
        #[arg(long, default_value = "biased_dither")]
        variant: String,
        /// Bank directory (default: <output-dir>/cache/<variant>/bank).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Output directory for train.qpds and test.qpds (default: <output-dir>/cache/<variant>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier on saved projections and write its error curve.
    TrainClassifier {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Name used for the curve file and column.
        #[arg(long, default_value = "classifier")]
        name: String,
    },
    /// Run all three variants and write the curves and summary.
    RunFigure3,
    /// Compare analytic and finite-difference gradients on random nets.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        nets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Flags that override [`ExperimentConfig`] fields.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset directory [default: $QUALPROJ_DATA_DIR or ./data].
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Output directory [default: results].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads, 0 for one per core [default: 1].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Recompute instead of reusing cached banks and projections.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// [default: 100]
    #[arg(long, global = true)]
    pub n_projection_images: Option<usize>,
    /// [default: 1000]
    #[arg(long, global = true)]
    pub n_train: Option<usize>,
    /// [default: whole test file]
    #[arg(long, global = true)]
    pub n_test: Option<usize>,
    /// Biased-sigmoid offset [default: 5]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// [default: 0.5]
    #[arg(long, global = true)]
    pub dither_amplitude: Option<f64>,
    /// [default: 100]
    #[arg(long, global = true)]
    pub dither_replicates: Option<usize>,
    /// [default: 100]
    #[arg(long, global = true)]
    pub projector_hidden: Option<usize>,
    /// [default: 50]
    #[arg(long, global = true)]
    pub projector_iterations: Option<usize>,
    /// [default: 1]
    #[arg(long, global = true)]
    pub projector_learning_rate: Option<f64>,
    /// [default: 100]
    #[arg(long, global = true)]
    pub classifier_hidden: Option<usize>,
    /// [default: 150]
    #[arg(long, global = true)]
    pub classifier_iterations: Option<usize>,
    /// [default: 1]
    #[arg(long, global = true)]
    pub classifier_learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub seed_selection: Option<u64>,
    #[arg(long, global = true)]
    pub seed_bank: Option<u64>,
    #[arg(long, global = true)]
    pub seed_classifier: Option<u64>,
    #[arg(long, global = true)]
    pub seed_dither: Option<u64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Overrides {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.data_dir.is_some() {
            c.data.data_dir = self.data_dir.clone();
        }
        set(&mut c.output_dir, self.output_dir.clone());
        set(&mut c.workers, self.workers);
        if self.no_cache {
            c.cache = false;
        }
        set(&mut c.n_projection_images, self.n_projection_images);
        set(&mut c.n_train, self.n_train);
        if self.n_test.is_some() {
            c.n_test = self.n_test;
        }
        set(&mut c.beta, self.beta);
        set(&mut c.dither.amplitude, self.dither_amplitude);
        set(&mut c.dither.replicates, self.dither_replicates);
        set(&mut c.projector.hidden, self.projector_hidden);
        set(&mut c.projector.iterations, self.projector_iterations);
        set(&mut c.projector.learning_rate, self.projector_learning_rate);
        set(&mut c.classifier.hidden, self.classifier_hidden);
        set(&mut c.classifier.iterations, self.classifier_iterations);
        set(
            &mut c.classifier.learning_rate,
            self.classifier_learning_rate,
        );
        set(&mut c.seeds.selection, self.seed_selection);
        set(&mut c.seeds.bank_base, self.seed_bank);
        set(&mut c.seeds.classifier_init, self.seed_classifier);
        set(&mut c.seeds.dither, self.seed_dither);
        c.validate()?;
        Ok(c)
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn run(cli: &Cli) -> Result<i32> {
    if let Command::Gradcheck { nets, seed } = cli.command {
        let report = gradient_check_suite(nets, seed)?;
        println!(
            "gradcheck: {} nets, max relative error {:.3e}",
            report.nets, report.max_relative_error
        );
        return Ok(if report.max_relative_error < GRADCHECK_TOLERANCE {
            0
        } else {
            1
        });
    }
    let cfg = cli.overrides.resolve()?;
    match &cli.command {
        Command::PrepareData => {
            let dir = cfg.data.resolved_dir();
            fetch::fetch_all(&cfg.data.sources, &dir)?;
            let data = prepare_data(&cfg)?;
            println!(
                "data ready in {}: {} projection images, {} train, {} test",
                dir.display(),
                data.projection_images.len(),
                data.train.len(),
                data.test.len()
            );
        }
        Command::TrainBank { variant, out } => {
            let variant = Variant::from_name(variant)?;
            let data = prepare_data(&cfg)?;
            let bank = obtain_bank(variant, &cfg, &data)?;
            let dir = out
                .clone()
                .unwrap_or_else(|| cfg.cache_dir(variant).join("bank"));
            let key = experiment::bank_cache_key(variant, &cfg, &data)?;
            save_bank(&bank, &variant.spec(&cfg).projector, &key, &dir)?;
            println!(
                "bank {} with {} projectors saved to {}",
                bank.fingerprint(),
                bank.len(),
                dir.display()
            );
        }
        Command::Project { variant, bank, out } => {
            let variant = Variant::from_name(variant)?;
            let bank_dir = bank
                .clone()
                .unwrap_or_else(|| cfg.cache_dir(variant).join("bank"));
            let (bank, _) = load_bank(&bank_dir)?;
            let data = prepare_data(&cfg)?;
            let out = out.clone().unwrap_or_else(|| cfg.cache_dir(variant));
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for (name, set) in [("train", &data.train), ("test", &data.test)] {
                let p = project_dataset(&bank, set, cfg.workers)?;
                let path = out.join(format!("{name}.qpds"));
                cache::write(&path, &p.vectors, Some(&p.labels))?;
                println!(
                    "{name}: {} projections written to {}",
                    p.len(),
                    path.display()
                );
            }
        }
        Command::TrainClassifier { train, test, name } => {
            let train = read_projection_set(train)?;
            let test = read_projection_set(test)?;
            let (net, curve) =
                train_classifier(&train, &test, &cfg.classifier_config(), name, cfg.workers)?;
            fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            curve.write_csv(&cfg.output_dir.join(format!("curve_{name}.csv")))?;
            model_io::save(
                &net,
                &cfg.output_dir.join(format!("classifier_{name}.json")),
            )?;
            println!(
                "{name}: final test error {:.4}",
                curve.final_error().unwrap_or(f64::NAN)
            );
        }
        Command::RunFigure3 => {
            let fig = experiment::run_figure3(&cfg)?;
            println!("{}", fig.summary_line());
        }
        Command::Gradcheck { .. } => unreachable!("handled above"),
    }
    Ok(0)
}
