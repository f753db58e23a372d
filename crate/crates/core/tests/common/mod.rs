//! Small on-disk datasets in the real MNIST IDX and CIFAR-10 binary formats.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use qualproj::datasets::cifar::{encode_cifar_batch, RawCifarImage, CIFAR_PIXELS};
use qualproj::datasets::mnist::write_mnist;
use qualproj::datasets::{LabeledDataset, Source, IMAGE_LEN, IMAGE_SIDE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Digit-like images: class `c` lights a 6x6 block at a class-specific spot.
pub fn synthetic_digits(n: usize, seed: u64) -> LabeledDataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i * 3 + i / 10) % 10;
        let (row0, col0) = (2 + (c / 5) * 12, 2 + (c % 5) * 5);
        let mut img = vec![0.0; IMAGE_LEN];
        for (k, px) in img.iter_mut().enumerate() {
            let (y, x) = (k / IMAGE_SIDE, k % IMAGE_SIDE);
            let on = (row0..row0 + 6).contains(&y) && (col0..col0 + 6).contains(&x);
            let base = if on { 0.8 } else { 0.05 };
            *px = (base + r.gen_range(-0.05..0.15f64)).clamp(0.0, 1.0);
        }
        images.push(img);
        labels.push(c as u8);
    }
    LabeledDataset {
        images,
        labels,
        source: Source::Mnist,
    }
}

pub fn synthetic_cifar(n: usize, seed: u64) -> Vec<RawCifarImage> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            RawCifarImage::new((i % 10) as u8, (0..CIFAR_PIXELS).map(|_| r.gen()).collect())
                .unwrap()
        })
        .collect()
}

/// Writes a complete data directory (train/test MNIST, one CIFAR batch).
pub fn write_fixture(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    write_mnist(
        &synthetic_digits(60, 1),
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    write_mnist(
        &synthetic_digits(40, 2),
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
    fs::write(
        dir.join("data_batch_1.bin"),
        encode_cifar_batch(&synthetic_cifar(30, 3)),
    )
    .unwrap();
}

/// A config for the fixture that finishes in about a second.
pub fn fixture_config(data_dir: &Path, output_dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "data": { "data_dir": data_dir, "cifar_batches": ["data_batch_1.bin"] },
        "n_projection_images": 12,
        "n_train": 50,
        "n_test": 40,
        "dither": { "replicates": 6, "amplitude": 0.5 },
        "projector": { "hidden": 8, "iterations": 6 },
        "classifier": { "hidden": 10, "iterations": 8 },
        "output_dir": output_dir,
    });
    let path = output_dir.with_extension("json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}
