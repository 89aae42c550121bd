use thiserror::Error;

/// Errors produced by the margin-vote library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("worker accuracy must lie in [0, 1], got {0}")]
    InvalidAccuracy(f64),

    #[error("odds ratio must be a nonnegative number, got {0}")]
    InvalidOdds(f64),

    #[error("consensus threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),

    #[error("consensus threshold must be a positive integer here, got {0}")]
    NonIntegerThreshold(f64),

    #[error("gambler's ruin requires 0 < k < N, got k={k}, N={n}")]
    InvalidGambler { k: u64, n: u64 },

    /// Equivalence formulas divide by ln(phi), and need both pools better than random.
    #[error("{name} must be greater than 1 (better than random), got {value}")]
    OddsNotAboveOne { name: &'static str, value: f64 },

    #[error("{name} is out of range: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("relative error is undefined for a zero estimate")]
    ZeroEstimate,

    #[error("walk exceeded the step cap of {cap} votes")]
    StepCapExceeded { cap: u64 },

    #[error("majority panel size must be odd for fixed-panel voting, got {0}")]
    EvenPanel(u32),

    #[error(
        "equivalent threshold {0} is not an integer; choose a side with integerize_threshold"
    )]
    NeedsRounding(f64),

    #[error("unknown item id {0:?}")]
    UnknownItem(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate label for worker {worker:?} on item {item:?}")]
    DuplicateLabel {
        line: u64,
        worker: String,
        item: String,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("thread pool error: {0}")]
    ThreadPool(String),
}

impl Error {
    /// Whether the error reflects bad input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::StepCapExceeded { .. } | Error::Io(_) | Error::ThreadPool(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
