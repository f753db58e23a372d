//! Download and unpack the raw dataset archives.
//!
//! MNIST ships as four gzip files, CIFAR-10 as one `.tar.gz` holding the
//! binary batches. Everything is unpacked flat into a single data directory.
//! Downloads are checked against `Content-Length`, and unpacked files against
//! their well-known sizes.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

pub const CIFAR_FILES: [&str; 6] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
    "test_batch.bin",
];

/// Byte size of each standard file once unpacked.
pub fn expected_size(name: &str) -> Option<u64> {
    match name {
        "train-images-idx3-ubyte" => Some(16 + 60_000 * 784),
        "train-labels-idx1-ubyte" => Some(8 + 60_000),
        "t10k-images-idx3-ubyte" => Some(16 + 10_000 * 784),
        "t10k-labels-idx1-ubyte" => Some(8 + 10_000),
        n if CIFAR_FILES.contains(&n) => Some(10_000 * 3073),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSources {
    /// Base URL holding `<name>.gz` for every MNIST file.
    pub mnist_base_url: String,
    pub cifar_archive_url: String,
}

impl Default for DataSources {
    fn default() -> Self {
        DataSources {
            mnist_base_url: "https://ossci-datasets.s3.amazonaws.com/mnist/".into(),
            cifar_archive_url: "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz".into(),
        }
    }
}

/// Streams `url` to `dest`, returning the byte count.
pub fn download(url: &str, dest: &Path) -> Result<u64> {
    let fail = |reason: String| Error::Fetch {
        url: url.to_string(),
        reason,
    };
    let response = ureq::get(url).call().map_err(|e| fail(e.to_string()))?;
    let declared: Option<u64> = response
        .header("Content-Length")
        .and_then(|v| v.parse().ok());
    let mut reader = response.into_reader();
    let mut out = BufWriter::new(File::create(dest).map_err(|e| Error::io(dest, e))?);
    let n = io::copy(&mut reader, &mut out).map_err(|e| fail(e.to_string()))?;
    out.flush().map_err(|e| Error::io(dest, e))?;
    if let Some(d) = declared {
        if d != n {
            return Err(fail(format!("received {n} bytes, Content-Length was {d}")));
        }
    }
    Ok(n)
}

pub fn gunzip_file(src: &Path, dest: &Path) -> Result<u64> {
    let input = File::open(src).map_err(|e| Error::io(src, e))?;
    let mut decoder = GzDecoder::new(BufReader::new(input));
    let mut out = BufWriter::new(File::create(dest).map_err(|e| Error::io(dest, e))?);
    let n = io::copy(&mut decoder, &mut out).map_err(|e| Error::io(src, e))?;
    out.flush().map_err(|e| Error::io(dest, e))?;
    Ok(n)
}

/// Extracts regular files whose base name satisfies `keep` into `dest_dir`,
/// dropping any directory prefix inside the archive.
pub fn extract_tar_gz(
    src: &Path,
    dest_dir: &Path,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<PathBuf>> {
    let input = File::open(src).map_err(|e| Error::io(src, e))?;
    let mut archive = tar::Archive::new(GzDecoder::new(BufReader::new(input)));
    let mut written = Vec::new();
    for entry in archive.entries().map_err(|e| Error::io(src, e))? {
        let mut entry = entry.map_err(|e| Error::io(src, e))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let path = entry.path().map_err(|e| Error::io(src, e))?.into_owned();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
            continue;
        };
        if !keep(&name) {
            continue;
        }
        let dest = dest_dir.join(&name);
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf).map_err(|e| Error::io(src, e))?;
        fs::write(&dest, buf).map_err(|e| Error::io(&dest, e))?;
        written.push(dest);
    }
    Ok(written)
}

fn size_ok(path: &Path, name: &str) -> bool {
    match (fs::metadata(path), expected_size(name)) {
        (Ok(m), Some(size)) => m.len() == size,
        (Ok(_), None) => true,
        _ => false,
    }
}

/// Checks that every standard file is present in `dir` with its expected
/// size; returns the names that are missing or wrong.
pub fn missing_files(dir: &Path) -> Vec<&'static str> {
    MNIST_FILES
        .iter()
        .chain(CIFAR_FILES.iter())
        .copied()
        .filter(|name| !size_ok(&dir.join(name), name))
        .collect()
}

/// Downloads and unpacks whatever is missing from `dir`.
pub fn fetch_all(sources: &DataSources, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in MNIST_FILES {
        let dest = dir.join(name);
        if size_ok(&dest, name) {
            continue;
        }
        let gz = dir.join(format!("{name}.gz"));
        let url = format!("{}/{name}.gz", sources.mnist_base_url.trim_end_matches('/'));
        download(&url, &gz)?;
        gunzip_file(&gz, &dest)?;
        fs::remove_file(&gz).map_err(|e| Error::io(&gz, e))?;
        check_size(&dest, name)?;
    }
    if CIFAR_FILES.iter().any(|n| !size_ok(&dir.join(n), n)) {
        let archive = dir.join("cifar-10-binary.tar.gz");
        download(&sources.cifar_archive_url, &archive)?;
        extract_tar_gz(&archive, dir, |n| CIFAR_FILES.contains(&n))?;
        fs::remove_file(&archive).map_err(|e| Error::io(&archive, e))?;
        for name in CIFAR_FILES {
            check_size(&dir.join(name), name)?;
        }
    }
    Ok(())
}

fn check_size(path: &Path, name: &str) -> Result<()> {
    if size_ok(path, name) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{} does not have the expected size of {} bytes",
            path.display(),
            expected_size(name).unwrap_or(0)
        )))
    }
}
