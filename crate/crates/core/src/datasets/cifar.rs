//! CIFAR-10 binary batches: 3073-byte records, a label byte followed by the
//! 1024-byte red, green and blue planes of a 32x32 image.

use std::fs;
use std::path::Path;

use super::{IMAGE_LEN, IMAGE_SIDE};
use crate::error::{Error, ParseError, Result};

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PLANE: usize = CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_PIXELS: usize = 3 * CIFAR_PLANE;
pub const RECORD_STRIDE: usize = 1 + CIFAR_PIXELS;
pub const RECORDS_PER_BATCH: usize = 10_000;

/// Rec.601 luminance weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// One CIFAR-10 record, channel-planar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCifarImage {
    pub label: u8,
    pub pixels: Vec<u8>,
}

impl RawCifarImage {
    pub fn new(label: u8, pixels: Vec<u8>) -> Result<Self> {
        if label > 9 {
            return Err(Error::InvalidInput(format!(
                "CIFAR label {label} out of range"
            )));
        }
        if pixels.len() != CIFAR_PIXELS {
            return Err(Error::Shape(format!(
                "CIFAR record needs {CIFAR_PIXELS} pixel bytes, got {}",
                pixels.len()
            )));
        }
        Ok(RawCifarImage { label, pixels })
    }
}

pub fn parse_cifar_batch(bytes: &[u8], path: &Path) -> Result<Vec<RawCifarImage>> {
    if !bytes.len().is_multiple_of(RECORD_STRIDE) {
        return Err(Error::parse(
            path,
            ParseError::BadRecordSize {
                len: bytes.len(),
                stride: RECORD_STRIDE,
            },
        ));
    }
    bytes
        .chunks_exact(RECORD_STRIDE)
        .enumerate()
        .map(|(index, rec)| {
            if rec[0] > 9 {
                return Err(Error::parse(
                    path,
                    ParseError::BadLabel {
                        index,
                        label: rec[0],
                    },
                ));
            }
            Ok(RawCifarImage {
                label: rec[0],
                pixels: rec[1..].to_vec(),
            })
        })
        .collect()
}

pub fn encode_cifar_batch(records: &[RawCifarImage]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * RECORD_STRIDE);
    for r in records {
        out.push(r.label);
        out.extend_from_slice(&r.pixels);
    }
    out
}

/// Reads and concatenates the records of every batch file, in order.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<Vec<RawCifarImage>> {
    let mut all = Vec::new();
    for p in batch_paths {
        let path = p.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        all.extend(parse_cifar_batch(&bytes, path)?);
    }
    Ok(all)
}

/// Grayscale 32x32 plane in [0, 1].
pub fn grayscale(raw: &RawCifarImage) -> Vec<f64> {
    let (r, rest) = raw.pixels.split_at(CIFAR_PLANE);
    let (g, b) = rest.split_at(CIFAR_PLANE);
    r.iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            let (r, g, b) = (
                f64::from(r) / 255.0,
                f64::from(g) / 255.0,
                f64::from(b) / 255.0,
            );
            LUMA[0] * r + LUMA[1] * g + LUMA[2] * b
        })
        .collect()
}

/// Bilinear resampling of a square `src_side` image to `dst_side`, sampling at
/// pixel centres with edge clamping.
pub fn resample_bilinear(src: &[f64], src_side: usize, dst_side: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_side * src_side);
    let scale = src_side as f64 / dst_side as f64;
    let max = (src_side - 1) as f64;
    let coords: Vec<(usize, usize, f64)> = (0..dst_side)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_side - 1);
            (lo, hi, s - lo as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(dst_side * dst_side);
    for &(y0, y1, fy) in &coords {
        for &(x0, x1, fx) in &coords {
            let p = |y: usize, x: usize| src[y * src_side + x];
            let top = (1.0 - fx) * p(y0, x0) + fx * p(y0, x1);
            let bottom = (1.0 - fx) * p(y1, x0) + fx * p(y1, x1);
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    out
}

/// Grayscale, resample 32x32 to 28x28 and flatten row-major to 784 values in [0, 1].
pub fn preprocess_cifar(raw: &RawCifarImage) -> Vec<f64> {
    let mut img = resample_bilinear(&grayscale(raw), CIFAR_SIDE, IMAGE_SIDE);
    debug_assert_eq!(img.len(), IMAGE_LEN);
    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    img
}
