use thiserror::Error;

/// Errors raised by the rank runtime itself.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuntimeError {
    #[error("deadlock: ranks {ranks:?} blocked in receive past the timeout")]
    Deadlock { ranks: Vec<usize> },
    #[error("rank {rank} panicked: {message}")]
    WorkerPanicked { rank: usize, message: String },
    #[error("rank {rank} aborted after a failure on another rank")]
    Aborted { rank: usize },
    #[error("rank {rank}: peer {peer} disconnected")]
    Disconnected { rank: usize, peer: usize },
    #[error("invalid rank count {0}")]
    InvalidRankCount(usize),
    #[error("message from rank {peer} has {got} entries, expected {expected}")]
    PayloadSize {
        peer: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),
    #[error("global row {row} is neither owned nor harvested")]
    MissingRow { row: usize },
    #[error("zero l1-Jacobi diagonal at row {row}")]
    SingularSmoother { row: usize },
    #[error("partition mismatch in {0}")]
    PartitionMismatch(&'static str),
    #[error("halo plan does not match the matrix (stale plan)")]
    StalePlan,
    #[error("prolongator is not block diagonal: row {row} references column {col}")]
    NotBlockDiagonal { row: usize, col: usize },
    #[error("coarsening stagnated at level {level}: matching left size {size} unchanged")]
    Stagnation { level: usize, size: usize },
    #[error("level {level} out of range (hierarchy has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("PCG breakdown at iteration {iteration}: {reason}")]
    Breakdown { iteration: usize, reason: String },
    #[error("matrix market line {line}: {message}")]
    MatrixMarket { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
