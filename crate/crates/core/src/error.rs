use thiserror::Error;

/// Errors raised by the chain, flow and simulation routines.
///
/// Indices carried by variants are 1-based, matching every external format.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("matrix must have at least one row")]
    Empty,
    #[error("entry ({row}, {col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} sums to {sum}, outside tolerance")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cut must be a nonempty proper subset of the index set")]
    TrivialCut,
    #[error("pair indices must differ (got {0} twice)")]
    EqualIndices(usize),
    #[error("index {index} outside 1..={m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("activation probabilities at step {step} sum to {mass}, expected 1")]
    DegenerateSchedule { step: u64, mass: f64 },
    #[error("failure matrix entry ({row}, {col}) is not binary")]
    NonBinaryFailureMatrix { row: usize, col: usize },
    #[error("model `{0}` has no closed-form expectation")]
    NoClosedForm(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("matrix is not block diagonal w.r.t. the partition: entry ({row}, {col}) = {value}")]
    NotBlockDiagonal { row: usize, col: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
