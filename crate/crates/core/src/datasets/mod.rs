//! Dataset loading, preprocessing and subset selection.
//!
//! Every sample ends up as a flat row-major vector of 784 intensities in
//! [0, 1]: MNIST digits directly, CIFAR-10 images after grayscale conversion
//! and bilinear resampling from 32x32 to 28x28.

pub mod cache;
pub mod cifar;
pub mod fetch;
pub mod mnist;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use cifar::{load_cifar10, preprocess_cifar, RawCifarImage};
pub use mnist::load_mnist;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Mnist,
    Cifar10,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub source: Source,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Checks the length, pixel range and label range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} images but {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        if let Some(i) = self.images.iter().position(|img| img.len() != IMAGE_LEN) {
            return Err(Error::Shape(format!(
                "image {i} does not have {IMAGE_LEN} pixels"
            )));
        }
        if self
            .images
            .iter()
            .flatten()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidInput("pixel outside [0, 1]".into()));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 9) {
            return Err(Error::InvalidInput(format!(
                "label {} at index {i} is not a digit class",
                self.labels[i]
            )));
        }
        Ok(())
    }
}

/// A preprocessed CIFAR image chosen to anchor one projector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    /// Index into the concatenated CIFAR record list.
    pub id: usize,
    pub label: u8,
    pub pixels: Vec<f64>,
}

/// Draws `k` distinct records without replacement (seeded) and returns them
/// preprocessed, in draw order.
pub fn select_projection_images(
    cifar: &[RawCifarImage],
    k: usize,
    seed: u64,
) -> Result<Vec<ProjectionImage>> {
    if k > cifar.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {k} projection images from {} records",
            cifar.len()
        )));
    }
    let mut r = rng::seeded(seed);
    Ok(index::sample(&mut r, cifar.len(), k)
        .into_iter()
        .map(|id| ProjectionImage {
            id,
            label: cifar[id].label,
            pixels: preprocess_cifar(&cifar[id]),
        })
        .collect())
}

/// The first `n` examples in file order.
pub fn select_training_subset(data: &LabeledDataset, n: usize) -> Result<LabeledDataset> {
    if n > data.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot take {n} training examples from {}",
            data.len()
        )));
    }
    Ok(LabeledDataset {
        images: data.images[..n].to_vec(),
        labels: data.labels[..n].to_vec(),
        source: data.source,
    })
}
