use std::path::PathBuf;

/// Errors produced by the library. Every fallible public function returns
/// [`Result`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{}: {kind}", path.display())]
    Parse { path: PathBuf, kind: ParseError },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("download of {url} failed: {reason}")]
    Fetch { url: String, reason: String },

    #[error("variant {variant}: {source}")]
    Variant {
        variant: String,
        #[source]
        source: Box<Error>,
    },
}

/// What went wrong while decoding a binary dataset or cache file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated file: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("unexpected image dimensions {rows}x{cols}")]
    BadDimensions { rows: usize, cols: usize },

    #[error("file size {len} is not a multiple of the {stride}-byte record stride")]
    BadRecordSize { len: usize, stride: usize },

    #[error("record {index} has label {label}, expected 0..=9")]
    BadLabel { index: usize, label: u8 },

    #[error("unsupported format version {0}")]
    BadVersion(u32),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, kind: ParseError) -> Self {
        Error::Parse {
            path: path.into(),
            kind,
        }
    }

    pub(crate) fn in_variant(self, variant: &str) -> Self {
        Error::Variant {
            variant: variant.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
