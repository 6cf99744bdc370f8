use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("frequency {f0} Hz is not below the Nyquist limit {nyquist} Hz")]
    AboveNyquist { f0: f64, nyquist: f64 },

    #[error("audio contains non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("sample {value} at index {index} is outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("wav format error: {0}")]
    WavFormat(String),

    #[error("velocity {velocity} m/s is not below the wave speed {c} m/s")]
    Nonphysical { velocity: f64, c: f64 },

    #[error("undersampling factor {n} outside [1, {max}]")]
    FactorOutOfRange { n: usize, max: usize },

    #[error("sampling rate {fs_star} Hz violates band-pass sampling bounds [{low}, {high}] Hz")]
    InvalidUndersampling { fs_star: f64, low: f64, high: f64 },

    #[error("frame of {len} samples exceeds FFT size {fft_size}")]
    FrameTooLong { len: usize, fft_size: usize },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: f64, actual: f64 },

    #[error("band selection is empty")]
    EmptyBand,

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("stream error: expected frame {expected}, got {actual}")]
    OutOfOrder { expected: u64, actual: u64 },

    #[error("incompatible {what}: {detail}")]
    Incompatible { what: &'static str, detail: String },

    #[error("corrupt {what}: {detail}")]
    Corrupt { what: &'static str, detail: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
