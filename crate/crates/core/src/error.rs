//! Crate-wide error type.

use crate::model::Band;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid band edges: lo={lo_hz} hi={hi_hz} ({reason})")]
    InvalidBand {
        lo_hz: f64,
        hi_hz: f64,
        reason: &'static str,
    },

    #[error("band edge {edge_hz} Hz (with transition) violates Nyquist {nyquist_hz} Hz")]
    NyquistViolation { edge_hz: f64, nyquist_hz: f64 },

    #[error("signal too short: {len} samples, need more than {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("resampling factor {fs_in}/{fs_out} is not a positive integer")]
    NonIntegerFactor { fs_in: f64, fs_out: f64 },

    #[error("constant signal: standard deviation is zero")]
    ConstantSignal,

    #[error("degenerate ranks: all values identical")]
    DegenerateRanks,

    #[error("need at least {min} samples, got {len}")]
    TooFewSamples { len: usize, min: usize },

    #[error("joint covariance is singular (relative pivot below {tolerance:e})")]
    SingularCovariance { tolerance: f64 },

    #[error("unknown channel: {0}")]
    UnknownChannel(String),

    #[error("channel selection is empty")]
    EmptySelection,

    #[error("lag overlap {overlap} shorter than {min} (10x lag count)")]
    OverlapTooShort { overlap: usize, min: usize },

    #[error("window [{lo_ms}, {hi_ms}] ms outside lag grid [{grid_lo_ms}, {grid_hi_ms}] ms")]
    WindowOutsideGrid {
        lo_ms: f64,
        hi_ms: f64,
        grid_lo_ms: f64,
        grid_hi_ms: f64,
    },

    #[error("lag grids do not match")]
    GridMismatch,

    #[error("sampling rate {actual} Hz does not match expected {expected} Hz")]
    FsMismatch { expected: f64, actual: f64 },

    #[error("too few permutations: {n}, need at least {min}")]
    TooFewPermutations { n: usize, min: usize },

    #[error("too few subjects: {n}, need at least {min} ({context})")]
    TooFewSubjects {
        n: usize,
        min: usize,
        context: &'static str,
    },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("subject {id} is missing the {band} band")]
    MissingBand { id: String, band: Band },

    #[error("adjacency does not cover channel {0}")]
    AdjacencyMissingChannel(String),

    #[error("duplicate channel positions: {0} and {1}")]
    DuplicatePositions(String, String),

    #[error("crop of {minutes} minutes is outside the recording ({available_min:.3} minutes)")]
    CropOutOfRange { minutes: f64, available_min: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("matrix payload length mismatch: header claims {expected} bytes, file has {actual}")]
    PayloadMismatch { expected: u64, actual: u64 },

    #[error("unknown matrix format version {0}")]
    UnknownVersion(u32),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
