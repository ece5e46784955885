use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the speech-to-trajectory pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),

    #[error(
        "unsupported WAV format: format code {format_code}, {channels} channel(s), \
         {sample_rate} Hz, {bits_per_sample} bits (need PCM mono 16000 Hz 16-bit)"
    )]
    UnsupportedFormat {
        format_code: u16,
        channels: u16,
        sample_rate: u32,
        bits_per_sample: u16,
    },

    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("batch normalization in train mode needs at least 2 samples, got {0}")]
    DegenerateBatch(usize),

    #[error("rmse of negative mse {0}")]
    NegativeInput(f64),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a checkpoint file (bad magic {0:?})")]
    BadMagic([u8; 4]),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("tensor {name}: checkpoint has shape {found:?}, network expects {expected:?}")]
    TensorShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("dataset root {0} is missing validation_list.txt or testing_list.txt")]
    MissingSplitLists(PathBuf),

    #[error("no utterances found under {0}")]
    EmptyDataset(PathBuf),

    #[error("label map: {0}")]
    LabelMap(String),

    #[error("noise clip has {0} samples, need at least 16000")]
    NoiseTooShort(usize),

    #[error("clip has zero signal power; cannot set a finite SNR")]
    ZeroSignalPower,

    #[error("non-finite loss at epoch {epoch}, batch {batch} (first file {first_file})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        first_file: String,
    },

    #[error("{path}: {source}")]
    WithPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("inference engine stopped")]
    EngineStopped,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Self {
        Error::WithPath {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by inputs (files, configs, data) rather than bugs.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::ShapeMismatch { .. } | Error::EngineStopped => false,
            Error::WithPath { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
