//! The `bank_size x 100 x 10` softmax classifier trained on projections.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{init_network, loss, Activation, Gradients, LossKind, Mlp, TrainConfig};
use crate::parallel;
use crate::projector::ProjectionSet;

pub const NUM_CLASSES: usize = 10;
pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_ITERATIONS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub hidden_activation: Activation,
    /// `train.seed` initializes the network; share it across variants.
    pub train: TrainConfig,
    /// Keep the output-layer biases at zero instead of training them.
    pub freeze_output_bias: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: DEFAULT_HIDDEN,
            hidden_activation: Activation::BiasedSigmoid {
                beta: crate::mlp::DEFAULT_BETA,
            },
            train: TrainConfig {
                learning_rate: 1.0,
                iterations: DEFAULT_ITERATIONS,
                seed: 0,
            },
            freeze_output_bias: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "classifier hidden width must be positive".into(),
            ));
        }
        if self.hidden_activation == Activation::Softmax {
            return Err(Error::InvalidConfig(
                "softmax is only allowed on the output layer".into(),
            ));
        }
        self.train.validate()
    }

    /// Initial network for `input_dim` inputs; depends only on the config.
    pub fn initial_network(&self, input_dim: usize) -> Result<Mlp> {
        init_network(
            &[input_dim, self.hidden, NUM_CLASSES],
            &[self.hidden_activation, Activation::Softmax],
            self.train.seed,
        )
    }
}

/// Test error after each training sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub variant_name: String,
    pub errors: Vec<f64>,
}

impl ErrorCurve {
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }

    pub fn min_error(&self) -> Option<f64> {
        self.errors.iter().copied().reduce(f64::min)
    }

    /// CSV with header `iteration,error`, iterations numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,error\n");
        for (i, e) in self.errors.iter().enumerate() {
            let _ = writeln!(out, "{},{e:.6}", i + 1);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn one_hot(label: u8) -> [f64; NUM_CLASSES] {
    let mut t = [0.0; NUM_CLASSES];
    t[label as usize] = 1.0;
    t
}

fn check_set(set: &ProjectionSet, dim: usize, what: &str) -> Result<()> {
    if set.dim() != dim {
        return Err(Error::Shape(format!(
            "{what} projections have width {}, expected {dim}",
            set.dim()
        )));
    }
    if set.labels.len() != set.len() {
        return Err(Error::InvalidInput(format!(
            "{what} set has {} rows but {} labels",
            set.len(),
            set.labels.len()
        )));
    }
    if let Some(l) = set.labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(Error::InvalidInput(format!(
            "{what} label {l} out of range"
        )));
    }
    Ok(())
}

/// Trains with per-example SGD in fixed row order, one full sweep per
/// iteration, and records the test error after every sweep.
pub fn train_classifier(
    train: &ProjectionSet,
    test: &ProjectionSet,
    cfg: &ClassifierConfig,
    variant_name: &str,
    workers: usize,
) -> Result<(Mlp, ErrorCurve)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    check_set(train, train.dim(), "training")?;
    check_set(test, train.dim(), "test")?;
    let mut net = cfg.initial_network(train.dim())?;
    let last = net.layers().len() - 1;
    let mut errors = Vec::with_capacity(cfg.train.iterations);
    let mut grads = Gradients::zeros_like(&net);
    for _ in 0..cfg.train.iterations {
        for (j, &label) in train.labels.iter().enumerate() {
            grads.iter_mut().for_each(|g| *g = 0.0);
            net.accumulate_gradient(
                train.row(j),
                &one_hot(label),
                LossKind::CrossEntropy,
                1.0,
                &mut grads,
            );
            if cfg.freeze_output_bias {
                grads.layers[last].biases.iter_mut().for_each(|g| *g = 0.0);
            }
            net.apply_gradients(&grads, cfg.train.learning_rate)?;
        }
        errors.push(evaluate_error_with(&net, test, workers)?);
    }
    Ok((
        net,
        ErrorCurve {
            variant_name: variant_name.to_string(),
            errors,
        },
    ))
}

/// Index of the largest output; ties go to the lowest index.
pub fn predict(net: &Mlp, projection: &[f64]) -> Result<usize> {
    Ok(argmax(&net.output(projection)?))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose prediction differs from the label.
pub fn evaluate_error(net: &Mlp, data: &ProjectionSet) -> Result<f64> {
    evaluate_error_with(net, data, 1)
}

pub fn evaluate_error_with(net: &Mlp, data: &ProjectionSet, workers: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    check_set(data, net.input_dim(), "evaluation")?;
    let wrong: usize = parallel::with_workers(workers, || {
        (0..data.len())
            .into_par_iter()
            .map(|j| {
                usize::from(argmax(&net.output_unchecked(data.row(j))) != data.labels[j] as usize)
            })
            .sum()
    })?;
    Ok(wrong as f64 / data.len() as f64)
}

/// Mean cross-entropy over a projection set.
pub fn mean_loss(net: &Mlp, data: &ProjectionSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let mut total = 0.0;
    for (j, &label) in data.labels.iter().enumerate() {
        total += loss(
            LossKind::CrossEntropy,
            &net.output(data.row(j))?,
            &one_hot(label),
        )?;
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::cache::Matrix;
    use crate::rng;
    use rand::Rng;

    fn set(rows: usize, dim: usize, seed: u64) -> ProjectionSet {
        let mut r = rng::seeded(seed);
        let labels: Vec<u8> = (0..rows).map(|i| (i % 10) as u8).collect();
        // Class-dependent bumps so the problem is learnable.
        let data = labels
            .iter()
            .flat_map(|&l| {
                let mut row: Vec<f64> = (0..dim).map(|_| r.gen_range(0.2..0.4)).collect();
                row[l as usize % dim] += 0.5;
                row
            })
            .collect();
        ProjectionSet {
            vectors: Matrix {
                rows,
                cols: dim,
                data,
            },
            labels,
            bank_fingerprint: "test".into(),
        }
    }

    fn cfg(iterations: usize) -> ClassifierConfig {
        ClassifierConfig {
            hidden: 16,
            train: TrainConfig {
                learning_rate: 1.0,
                iterations,
                seed: 4,
            },
            ..ClassifierConfig::default()
        }
    }

    #[test]
    fn default_settings() {
        let c = ClassifierConfig::default();
        assert_eq!(c.hidden, 100);
        assert_eq!(c.train.iterations, 150);
        assert_eq!(c.train.learning_rate, 1.0);
        let net = c.initial_network(100).unwrap();
        assert_eq!(net.layer_sizes(), vec![100, 100, 10]);
        assert_eq!(net.layers()[1].activation(), Activation::Softmax);
        assert!(net.layers()[1].biases().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn curve_has_one_entry_per_iteration_and_is_deterministic() {
        let (train, test) = (set(60, 12, 1), set(40, 12, 2));
        let (net, curve) = train_classifier(&train, &test, &cfg(7), "v", 1).unwrap();
        assert_eq!(curve.errors.len(), 7);
        assert!(curve.errors.iter().all(|e| (0.0..=1.0).contains(e)));
        let (net2, curve2) = train_classifier(&train, &test, &cfg(7), "v", 3).unwrap();
        assert_eq!(curve, curve2);
        assert_eq!(net, net2);
        assert!(
            mean_loss(&net, &train).unwrap()
                < mean_loss(&cfg(7).initial_network(12).unwrap(), &train).unwrap()
        );
    }

    #[test]
    fn frozen_output_bias_stays_zero() {
        let (train, test) = (set(30, 12, 1), set(10, 12, 2));
        let c = ClassifierConfig {
            freeze_output_bias: true,
            ..cfg(2)
        };
        let (net, _) = train_classifier(&train, &test, &c, "v", 1).unwrap();
        assert!(net.layers()[1].biases().iter().all(|&b| b == 0.0));
        let (net, _) = train_classifier(&train, &test, &cfg(2), "v", 1).unwrap();
        assert!(net.layers()[1].biases().iter().any(|&b| b != 0.0));
    }

    #[test]
    fn dimension_and_label_errors() {
        let train = set(20, 12, 1);
        assert!(matches!(
            train_classifier(&train, &set(5, 11, 2), &cfg(1), "v", 1),
            Err(Error::Shape(_))
        ));
        let mut bad = set(5, 12, 2);
        bad.labels[0] = 10;
        assert!(matches!(
            train_classifier(&train, &bad, &cfg(1), "v", 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn argmax_examples() {
        let mut v = vec![0.05; 10];
        v[7] = 0.55;
        assert_eq!(argmax(&v), 7);
        let mut t = vec![0.0; 10];
        t[2] = 0.5;
        t[5] = 0.5;
        assert_eq!(argmax(&t), 2);
        assert_eq!(argmax(&[0.1; 10]), 0);
    }

    #[test]
    fn argmax_is_invariant_under_monotone_logit_transforms() {
        let logits = [0.3, -1.2, 2.5, 2.4, 0.0, -0.7, 1.1, 0.9, -2.0, 1.7];
        let softmax = |z: &[f64]| crate::mlp::activate(Activation::Softmax, z).unwrap();
        let base = argmax(&softmax(&logits));
        for f in [|x: f64| 3.0 * x + 1.0, |x: f64| x.powi(3), |x: f64| x.exp()] {
            let t: Vec<f64> = logits.iter().map(|&x| f(x)).collect();
            assert_eq!(argmax(&softmax(&t)), base);
        }
    }

    fn constant_predictor(class: usize) -> Mlp {
        // Zero weights; output bias pushes one class up.
        use crate::mlp::Layer;
        let l0 = Layer::new(3, 2, vec![0.0; 6], vec![0.0; 2], Activation::PlainSigmoid).unwrap();
        let mut b = vec![0.0; 10];
        b[class] = 1.0;
        let l1 = Layer::new(2, 10, vec![0.0; 20], b, Activation::Softmax).unwrap();
        Mlp::from_layers(3, vec![l0, l1]).unwrap()
    }

    fn labelled(labels: Vec<u8>) -> ProjectionSet {
        ProjectionSet {
            vectors: Matrix {
                rows: labels.len(),
                cols: 3,
                data: vec![0.5; labels.len() * 3],
            },
            labels,
            bank_fingerprint: String::new(),
        }
    }

    #[test]
    fn error_endpoints() {
        let net = constant_predictor(4);
        assert_eq!(predict(&net, &[0.1, 0.2, 0.3]).unwrap(), 4);
        assert_eq!(evaluate_error(&net, &labelled(vec![4; 12])).unwrap(), 0.0);
        assert_eq!(evaluate_error(&net, &labelled(vec![3; 12])).unwrap(), 1.0);
        assert!(matches!(
            evaluate_error(&net, &labelled(vec![])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn random_predictor_sits_at_chance() {
        // Balanced labels, predictions from a fixed-seed random classifier.
        let n = 10_000;
        let mut r = rng::seeded(2718);
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let data: Vec<f64> = (0..n * 3).map(|_| r.gen()).collect();
        let set = ProjectionSet {
            vectors: Matrix {
                rows: n,
                cols: 3,
                data,
            },
            labels,
            bank_fingerprint: String::new(),
        };
        let net =
            init_network(&[3, 50, 10], &[Activation::Linear, Activation::Softmax], 99).unwrap();
        let mut scrambled = net.clone();
        // Large random weights so predictions vary from row to row.
        let mut g = Gradients::zeros_like(&net);
        g.iter_mut().for_each(|v| *v = r.gen_range(-20.0..20.0));
        scrambled.apply_gradients(&g, 1.0).unwrap();
        let err = evaluate_error(&scrambled, &set).unwrap();
        let sigma = (0.9f64 * 0.1 / n as f64).sqrt();
        assert!((err - 0.9).abs() < 3.0 * sigma, "error {err}");
    }

    #[test]
    fn csv_format() {
        let c = ErrorCurve {
            variant_name: "biased".into(),
            errors: vec![0.5, 0.25],
        };
        assert_eq!(c.to_csv(), "iteration,error\n1,0.500000\n2,0.250000\n");
        assert_eq!(c.final_error(), Some(0.25));
        assert_eq!(c.min_error(), Some(0.25));
    }
}
