//! Qualitative projection with small from-scratch neural networks.
//!
//! A bank of tiny `784x100x1` projector networks is trained, one per
//! projection image, to output 1 for that image. Any other image pushed
//! through the bank yields a vector of similarity scores, one per projection
//! image. A `100x100x10` softmax classifier trained on those vectors measures
//! how much class information the projection keeps.
//!
//! Modules follow the pipeline:
//!
//! - [`mlp`]: dense networks, losses, backprop, SGD, gradient checking.
//! - [`dither`]: parallel dither (replicate-with-noise then average).
//! - [`datasets`]: MNIST IDX and CIFAR-10 binary parsing, preprocessing.
//! - [`projector`]: projector training, banks, projection.
//! - [`classifier`]: classifier training and test error curves.
//! - [`experiment`]: the three-variant regularization comparison.
//! - [`cli`]: command-line front end.

pub mod classifier;
pub mod cli;
pub mod datasets;
pub mod dither;
pub mod error;
pub mod experiment;
pub mod mlp;
pub mod model_io;
pub mod parallel;
pub mod projector;
pub mod rng;

pub use error::{Error, ParseError, Result};
pub use mlp::{Activation, Gradients, LossKind, Mlp, TrainConfig};
