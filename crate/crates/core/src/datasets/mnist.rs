//! MNIST IDX files.
//!
//! Big-endian headers: images carry magic 2051 then count, rows, cols;
//! labels carry magic 2049 then count. Payload is one unsigned byte per pixel
//! or label. Bytes past the declared payload are ignored.

use std::fs;
use std::path::Path;

use super::{LabeledDataset, Source, IMAGE_LEN, IMAGE_SIDE};
use crate::error::{Error, ParseError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw pixel bytes of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::parse(
                path,
                ParseError::Truncated {
                    expected: offset + 4,
                    found: bytes.len(),
                },
            )
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::parse(path, ParseError::BadMagic { expected, found }));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let len = count * rows * cols;
    let payload = bytes.get(16..16 + len).ok_or_else(|| {
        Error::parse(
            path,
            ParseError::Truncated {
                expected: 16 + len,
                found: bytes.len(),
            },
        )
    })?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let payload = bytes.get(8..8 + count).ok_or_else(|| {
        Error::parse(
            path,
            ParseError::Truncated {
                expected: 8 + count,
                found: bytes.len(),
            },
        )
    })?;
    if let Some((index, &label)) = payload.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(Error::parse(path, ParseError::BadLabel { index, label }));
    }
    Ok(payload.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an MNIST image/label file pair, mapping pixel byte `v` to `v / 255`.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let raw = parse_idx_images(&read(images_path)?, images_path)?;
    if raw.rows != IMAGE_SIDE || raw.cols != IMAGE_SIDE {
        return Err(Error::parse(
            images_path,
            ParseError::BadDimensions {
                rows: raw.rows,
                cols: raw.cols,
            },
        ));
    }
    let labels = parse_idx_labels(&read(labels_path)?, labels_path)?;
    if labels.len() != raw.count {
        return Err(Error::parse(
            labels_path,
            ParseError::CountMismatch {
                images: raw.count,
                labels: labels.len(),
            },
        ));
    }
    let images = raw
        .pixels
        .chunks_exact(IMAGE_LEN)
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok(LabeledDataset {
        images,
        labels,
        source: Source::Mnist,
    })
}

/// Inverse of [`load_mnist`]: writes the pair of IDX files.
pub fn write_mnist(data: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let pixels = data
        .images
        .iter()
        .flatten()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let images = IdxImages {
        count: data.images.len(),
        rows: IMAGE_SIDE,
        cols: IMAGE_SIDE,
        pixels,
    };
    fs::write(images_path, encode_idx_images(&images)).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, encode_idx_labels(&data.labels)).map_err(|e| Error::io(labels_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(count: usize) -> (Vec<u8>, Vec<u8>) {
        let images = IdxImages {
            count,
            rows: 28,
            cols: 28,
            pixels: (0..count * 784).map(|i| (i % 256) as u8).collect(),
        };
        let labels: Vec<u8> = (0..count).map(|i| (i % 10) as u8).collect();
        (encode_idx_images(&images), encode_idx_labels(&labels))
    }

    fn write_pair(
        dir: &Path,
        images: &[u8],
        labels: &[u8],
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("images-idx3-ubyte");
        let lp = dir.join("labels-idx1-ubyte");
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn loads_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample(3);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        let ds = load_mnist(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.images[0].len(), 784);
        assert_eq!(ds.images[0][0], 0.0);
        assert_eq!(ds.images[0][255], 1.0);
        assert_eq!(ds.labels, vec![0, 1, 2]);
        assert_eq!(ds.source, Source::Mnist);
    }

    #[test]
    fn magic_numbers_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample(2);
        // Swapped files: each has the other's magic.
        let (ip, lp) = write_pair(dir.path(), &lab, &img);
        match load_mnist(&ip, &lp) {
            Err(Error::Parse {
                path,
                kind: ParseError::BadMagic { expected, found },
            }) => {
                assert_eq!(path, ip);
                assert_eq!(expected, 2051);
                assert_eq!(found, 2049);
            }
            other => panic!("unexpected {other:?}"),
        }
        let (ip, lp) = write_pair(dir.path(), &img, &img);
        assert!(matches!(
            load_mnist(&ip, &lp),
            Err(Error::Parse {
                kind: ParseError::BadMagic {
                    expected: 2049,
                    found: 2051
                },
                ..
            })
        ));
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample(2);
        let (ip, lp) = write_pair(dir.path(), &img[..img.len() - 1], &lab);
        assert!(matches!(
            load_mnist(&ip, &lp),
            Err(Error::Parse {
                kind: ParseError::Truncated { .. },
                ..
            })
        ));
        let (ip, lp) = write_pair(dir.path(), &img[..3], &lab);
        assert!(matches!(
            load_mnist(&ip, &lp),
            Err(Error::Parse {
                kind: ParseError::Truncated { .. },
                ..
            })
        ));
    }

    #[test]
    fn count_mismatch_names_label_file() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = sample(3);
        let (_, lab) = sample(2);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        match load_mnist(&ip, &lp) {
            Err(Error::Parse {
                path,
                kind:
                    ParseError::CountMismatch {
                        images: 3,
                        labels: 2,
                    },
            }) => assert_eq!(path, lp),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let mut lab = encode_idx_labels(&[1, 2, 3]);
        lab[9] = 10;
        assert!(matches!(
            parse_idx_labels(&lab, Path::new("x")),
            Err(Error::Parse {
                kind: ParseError::BadLabel {
                    index: 1,
                    label: 10
                },
                ..
            })
        ));
    }

    #[test]
    fn write_inverts_load() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample(4);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        let ds = load_mnist(&ip, &lp).unwrap();
        let (ip2, lp2) = (dir.path().join("a"), dir.path().join("b"));
        write_mnist(&ds, &ip2, &lp2).unwrap();
        assert_eq!(fs::read(ip2).unwrap(), img);
        assert_eq!(fs::read(lp2).unwrap(), lab);
    }

    proptest! {
        #[test]
        fn idx_reencoding_reproduces_consumed_bytes(
            count in 0usize..4,
            seed in any::<u8>(),
            trailing in prop::collection::vec(any::<u8>(), 0..5),
        ) {
            let images = IdxImages {
                count,
                rows: 28,
                cols: 28,
                pixels: (0..count * 784).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect(),
            };
            let bytes = encode_idx_images(&images);
            let mut with_tail = bytes.clone();
            with_tail.extend(&trailing);
            let parsed = parse_idx_images(&with_tail, Path::new("t")).unwrap();
            prop_assert_eq!(encode_idx_images(&parsed), bytes);
            let labels: Vec<u8> = (0..count).map(|i| ((i + seed as usize) % 10) as u8).collect();
            let lb = encode_idx_labels(&labels);
            prop_assert_eq!(encode_idx_labels(&parse_idx_labels(&lb, Path::new("t")).unwrap()), lb);
        }
    }
}
