use thiserror::Error;

use crate::learn::GglSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver stopped after {} iterations with KKT residual {:e}", .0.iterations, .0.kkt_residual)]
    MaxItersExceeded(Box<GglSolution>),
    #[error("unsupported transform kind: {0}")]
    UnsupportedKind(String),
    #[error("total rate {rate} is below the side-information floor {floor}")]
    InsufficientRate { rate: f64, floor: f64 },
    #[error("transform set is empty")]
    EmptySet,
    #[error("no trained transform for class {class_id}")]
    MissingTransform { class_id: u16 },
    #[error("rate-distortion curves do not overlap in PSNR")]
    NonOverlapping,
    #[error("BD-rate needs at least 4 points per curve, got {0}")]
    TooFewPoints(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad magic at byte {offset}")]
    BadMagic { offset: u64 },
    #[error("unsupported version {version} at byte {offset}")]
    UnsupportedVersion { version: u16, offset: u64 },
    #[error("unsupported value type {value_type} at byte {offset}")]
    UnsupportedValueType { value_type: u8, offset: u64 },
    #[error("invalid block size {n} at byte {offset}")]
    InvalidBlockSize { n: u16, offset: u64 },
    #[error("invalid provenance header at byte {offset}")]
    InvalidHeader { offset: u64 },
    #[error("sample value out of range at byte {offset}")]
    InvalidValue { offset: u64 },
    #[error("payload truncated at byte {offset}")]
    TruncatedPayload { offset: u64 },
    #[error("{count} trailing bytes at byte {offset}")]
    TrailingBytes { offset: u64, count: u64 },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
