use thiserror::Error;

/// Errors raised by the renormalization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precision {bits} bits is below the 64-bit minimum")]
    PrecisionTooLow { bits: u32 },

    #[error("loss of precision: {0}")]
    PrecisionLoss(String),

    #[error("precision budget: level {level} needs {required} bits, have {available}")]
    PrecisionBudget {
        level: usize,
        required: u32,
        available: u32,
    },

    #[error("iterate budget exceeded: {what} needs {required} map evaluations (budget {budget})")]
    Budget {
        what: String,
        required: u64,
        budget: u64,
    },

    #[error("rational rotation number: periodic orbit detected at level {level}")]
    RationalRotation { level: usize },

    #[error("continued fraction expansion terminated at step {step} (rational input)")]
    Terminated { step: usize },

    #[error("non-monotone family: {0}")]
    NonMonotone(String),

    #[error("lift is not monotone: d_lift <= 0 at x = {x}")]
    NotMonotone { x: f64 },

    #[error("combinatorics mismatch: {0}")]
    Combinatorics(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("critical point, Schwarzian undefined")]
    CriticalPoint,

    #[error("not a diffeomorphism: critical point inside image at step {step}")]
    NotDiffeomorphism { step: usize },

    #[error("period infinite: branch has a fixed point")]
    PeriodInfinite,

    #[error("chi exceeds cap {cap} (partial count {partial})")]
    ChiCap { cap: usize, partial: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal combinatorial error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Errors a caller may clear by recomputing at a higher precision.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss(_) | Error::PrecisionBudget { .. } | Error::PrecisionTooLow { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
