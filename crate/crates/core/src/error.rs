use std::io;

/// Errors produced by graph ingestion, calibration, and detection.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node id {id} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("graph has no connected component with at least {size} nodes")]
    NoLargeComponent { size: usize },

    #[error("calibration table fingerprint {table} does not match graph fingerprint {graph}")]
    FingerprintMismatch { table: String, graph: String },

    #[error("significance level {0} is not present in the calibration table")]
    AlphaNotInTable(f64),

    #[error("replica seeds [{start}, {end}) overlap the calibration seeds [{cal_start}, {cal_end})")]
    SeedOverlap {
        start: u64,
        end: u64,
        cal_start: u64,
        cal_end: u64,
    },

    #[error("deleting nodes invalidates the calibration table; supply a recalibration source")]
    StaleCalibration,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}
