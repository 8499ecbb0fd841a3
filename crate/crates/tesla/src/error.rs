//! Crate-wide error type and result alias.
//!
//! Every error carries a stable machine-readable code (used by the CLI for
//! one-line `error_code: message` reporting) and maps to a process exit
//! class: 2 usage, 3 data, 4 numeric.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Two operands with incompatible shapes; names both.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A NaN or infinity reached an operation that requires finite values.
    NonFinite { op: &'static str },
    /// Binning asked for a window shorter than two readings.
    WindowTooSmall { n: usize },
    /// Uniform binning with a bin count outside [1, n].
    BinCountOutOfRange { z: usize, n: usize },
    /// A model or training configuration violates its invariants.
    InvalidConfig(String),
    /// Input CSV header lacks a required column.
    MissingColumn(String),
    /// Two rows share a (sensor_id, timestamp) pair.
    DuplicateTimestamp { sensor: String, timestamp: String },
    /// A sensor's timestamps are not strictly increasing.
    OutOfOrderTimestamps { sensor: String, timestamp: String },
    /// A row failed to parse; carries the 1-based line number.
    MalformedRow { line: usize, message: String },
    /// Fewer than three sensors survive cleaning, so no train/val/test split exists.
    TooFewSensors { found: usize },
    EmptyTrainingSet,
    EmptyTestSet,
    /// Training produced a non-finite loss; carries the offending batch.
    Divergence { epoch: usize, batch: usize },
    /// A checkpoint file failed structural validation.
    BadCheckpoint(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::WindowTooSmall { .. } => "window_too_small",
            Error::BinCountOutOfRange { .. } => "bin_count_out_of_range",
            Error::InvalidConfig(_) => "invalid_config",
            Error::MissingColumn(_) => "missing_column",
            Error::DuplicateTimestamp { .. } => "duplicate_timestamp",
            Error::OutOfOrderTimestamps { .. } => "out_of_order_timestamps",
            Error::MalformedRow { .. } => "malformed_row",
            Error::TooFewSensors { .. } => "too_few_sensors",
            Error::EmptyTrainingSet => "empty_training_set",
            Error::EmptyTestSet => "empty_test_set",
            Error::Divergence { .. } => "divergence",
            Error::BadCheckpoint(_) => "bad_checkpoint",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    /// Process exit class: 2 usage, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::WindowTooSmall { .. }
            | Error::BinCountOutOfRange { .. } => 2,
            Error::NonFinite { .. } | Error::Divergence { .. } | Error::ShapeMismatch { .. } => 4,
            _ => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: incompatible shapes {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NonFinite { op } => write!(f, "{op}: non-finite value encountered"),
            Error::WindowTooSmall { n } => {
                write!(f, "window length {n} is too small; need at least 2 readings")
            }
            Error::BinCountOutOfRange { z, n } => {
                write!(f, "bin count {z} outside valid range [1, {n}]")
            }
            Error::InvalidConfig(msg) => write!(f, "{msg}"),
            Error::MissingColumn(col) => write!(f, "input is missing required column '{col}'"),
            Error::DuplicateTimestamp { sensor, timestamp } => {
                write!(f, "sensor '{sensor}' has duplicate timestamp {timestamp}")
            }
            Error::OutOfOrderTimestamps { sensor, timestamp } => {
                write!(f, "sensor '{sensor}' timestamps not strictly increasing at {timestamp}")
            }
            Error::MalformedRow { line, message } => write!(f, "line {line}: {message}"),
            Error::TooFewSensors { found } => {
                write!(f, "need at least 3 sensors to split, found {found}")
            }
            Error::EmptyTrainingSet => write!(f, "training set contains no windows"),
            Error::EmptyTestSet => write!(f, "test set contains no windows"),
            Error::Divergence { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::BadCheckpoint(msg) => write!(f, "checkpoint invalid: {msg}"),
            Error::Io(e) => write!(f, "{e}"),
            Error::Json(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
