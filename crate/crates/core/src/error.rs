use thiserror::Error;

/// Errors produced by the switched-system toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("integer overflow while {0}")]
    Overflow(String),

    #[error("Markov parameters are defined only for words of length >= 2 (got length {0})")]
    MarkovDomain(usize),

    #[error("no tabulated Markov parameter for word {0}")]
    NotTabulated(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("degenerate system: Hankel matrix has numerical rank 0")]
    DegenerateSystem,

    #[error("no zeroing input of length <= {max_len} reaches tolerance {tol:e} (best residual {best:e})")]
    NoZeroingInputFound { max_len: usize, tol: f64, best: f64 },

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("not identifiable: {0}")]
    NotIdentifiable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero samples: {0}")]
    ZeroSamples(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures that stem from the numerics rather than from
    /// malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSystem
                | Error::NoZeroingInputFound { .. }
                | Error::NotIdentifiable(_)
                | Error::Overflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
