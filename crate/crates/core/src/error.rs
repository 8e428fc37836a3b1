use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a finite value, got {0}")]
    NonFinite(f64),

    #[error("expected a finite nonzero value, got {0}")]
    ZeroOrNonFinite(f64),

    #[error("{0} is not representable as a finite binary64 value")]
    Unrepresentable(String),

    #[error("bit index {0} is out of range 0..=63")]
    BitOutOfRange(u32),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("row {0} has no nonzero entries")]
    ZeroRow(usize),

    #[error("column {0} has no nonzero entries")]
    ZeroColumn(usize),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lookup table {path}: {msg}")]
    Table { path: PathBuf, msg: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
