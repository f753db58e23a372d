//! Flat binary matrix cache ("QPDS").
//!
//! Layout, little-endian: magic `QPDS`, `u32` version, `u64` row count,
//! `u64` row width, then `count * dim` `f64` values row-major. Labels, when
//! present, live in a sidecar file holding one byte per row.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, ParseError, Result};

pub const MAGIC: &[u8; 4] = b"QPDS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// A dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(
            path,
            ParseError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            },
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::parse(
            path,
            ParseError::BadMagic {
                expected: u32::from_be_bytes(*MAGIC),
                found: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
            },
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::parse(path, ParseError::BadVersion(version)));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            ParseError::Truncated {
                expected,
                found: bytes.len(),
            },
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix { rows, cols, data })
}

pub fn labels_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".labels");
    path.with_file_name(name)
}

/// Writes the matrix and, if given, its labels sidecar.
pub fn write(path: &Path, m: &Matrix, labels: Option<&[u8]>) -> Result<()> {
    fs::write(path, encode(m)).map_err(|e| Error::io(path, e))?;
    if let Some(labels) = labels {
        let lp = labels_path(path);
        fs::write(&lp, labels).map_err(|e| Error::io(&lp, e))?;
    }
    Ok(())
}

/// Reads the matrix and its labels sidecar if one exists.
pub fn read(path: &Path) -> Result<(Matrix, Option<Vec<u8>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = decode(&bytes, path)?;
    let lp = labels_path(path);
    let labels = match fs::read(&lp) {
        Ok(l) => {
            if l.len() != m.rows {
                return Err(Error::parse(
                    &lp,
                    ParseError::CountMismatch {
                        images: m.rows,
                        labels: l.len(),
                    },
                ));
            }
            Some(l)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&lp, e)),
    };
    Ok((m, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Matrix {
            rows: 2,
            cols: 3,
            data: vec![0.5; 6],
        };
        let b = encode(&m);
        assert_eq!(&b[..4], b"QPDS");
        assert_eq!(b.len(), 24 + 48);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
    }

    #[test]
    fn rejects_corrupt_files() {
        let m = Matrix {
            rows: 1,
            cols: 2,
            data: vec![1.0, 2.0],
        };
        let mut b = encode(&m);
        assert!(decode(&b[..b.len() - 1], Path::new("c")).is_err());
        assert!(decode(&b[..10], Path::new("c")).is_err());
        b[0] = b'X';
        assert!(matches!(
            decode(&b, Path::new("c")),
            Err(Error::Parse {
                kind: ParseError::BadMagic { .. },
                ..
            })
        ));
        let mut b = encode(&m);
        b[4] = 9;
        assert!(matches!(
            decode(&b, Path::new("c")),
            Err(Error::Parse {
                kind: ParseError::BadVersion(9),
                ..
            })
        ));
    }

    #[test]
    fn file_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.qpds");
        let m = Matrix {
            rows: 3,
            cols: 1,
            data: vec![0.1, 0.2, 0.3],
        };
        write(&p, &m, Some(&[4, 5, 6])).unwrap();
        assert_eq!(labels_path(&p), dir.path().join("train.qpds.labels"));
        let (back, labels) = read(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(labels, Some(vec![4, 5, 6]));
        fs::write(labels_path(&p), [1u8]).unwrap();
        assert!(read(&p).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_is_identity(rows in 0usize..5, cols in 0usize..5, seed in any::<u64>()) {
            let data = (0..rows * cols).map(|i| f64::from_bits(seed.rotate_left(i as u32) & !(0x7ffu64 << 52) | (0x3ffu64 << 52))).collect();
            let m = Matrix { rows, cols, data };
            prop_assert_eq!(decode(&encode(&m), Path::new("p")).unwrap(), m);
        }
    }
}
