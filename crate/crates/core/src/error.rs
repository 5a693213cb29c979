use thiserror::Error;

/// Why a grid failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidReason {
    #[error("grid is not square: {len} entries for n = {n}")]
    NotSquare { n: usize, len: usize },
    #[error("empty matrix")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("column {col} sums to {sum}")]
    ColumnSum { col: usize, sum: f64 },
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("invalid matrix: {0}")]
    Invalid(#[from] InvalidReason),
    #[error("matrix size must be at least {min}, got {n}")]
    TooSmall { n: usize, min: usize },
    #[error("empty partition")]
    EmptyPartition,
    #[error("block sizes must be positive")]
    ZeroBlock,
    #[error("epsilon must be finite and nonnegative, got {0}")]
    BadEpsilon(f64),
    #[error("beta target must lie in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("product size {size} exceeds cap {cap}")]
    SizeCap { size: usize, cap: usize },
    #[error("Sinkhorn did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{kind} {index} has no positive entry")]
    ZeroLine { kind: LineKind, index: usize },
    #[error("malformed matrix file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Row,
    Column,
}

impl std::fmt::Display for LineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LineKind::Row => f.write_str("row"),
            LineKind::Column => f.write_str("column"),
        }
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("period {t} is not after the last recorded period {last}")]
    NonMonotonePeriod { t: u32, last: u32 },
    #[error("period must be 1-based, got 0")]
    ZeroPeriod,
    #[error("matrix rejected: {0}")]
    InvalidMatrix(#[from] InvalidReason),
    #[error("trajectory needs at least {needed} recorded periods, ledger has {have}")]
    InsufficientPeriods { needed: usize, have: usize },
    #[error("{targets} per-period targets for {records} recorded periods")]
    TargetArityMismatch { targets: usize, records: usize },
    #[error("no recorded period {0}")]
    UnknownPeriod(u32),
    #[error("next-period matrix size must be at least 2, got {0}")]
    BadNextSize(usize),
    #[error("corrupt ledger: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum RandomizeError {
    #[error("matrix has {matrix} states but catalog has {catalog} categories")]
    CatalogSizeMismatch { matrix: usize, catalog: usize },
    #[error("category index {index} out of range for {n} categories")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix has {matrix} states but the column needs {expected}")]
    SizeMismatch { matrix: usize, expected: usize },
    #[error("matrix is not bistochastic: {0}")]
    NotBistochastic(InvalidReason),
    #[error("expected a {expected} column")]
    WrongKind { expected: &'static str },
    #[error("joint catalog size {size} exceeds cap {cap}")]
    DimensionalityCap { size: usize, cap: usize },
    #[error("columns have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}
