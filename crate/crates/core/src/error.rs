use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("scale exponent {0} exceeds the global cap of {cap}", cap = crate::dyadic::MAX_EXPONENT)]
    ScaleOverflow(u32),

    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget { what: String, needed: String, budget: u64 },

    #[error("hypothesis (l/s)^d <= #G <= (l/s)^(dn)/2 fails: #G = {count}, bounds [{lower}, {upper}]")]
    Hypothesis {
        count: String,
        lower: String,
        upper: String,
    },

    #[error("scale budget exhausted at level {level}: {reason}")]
    ScaleBudgetExhausted { level: usize, reason: String },

    #[error(
        "no admissible selection after {attempts} attempts (best conflict count {best_conflicts}, threshold {threshold})"
    )]
    ResampleFailed {
        attempts: u32,
        best_conflicts: u64,
        threshold: u64,
    },

    #[error("log of a zero cube count at scale exponent {0}")]
    UndefinedLog(u32),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("scale exponent {requested} is finer than the finest built level {finest}")]
    OutOfRange { requested: u32, finest: u32 },

    #[error("construction stopped at level {level}: {message}")]
    Stopped {
        level: usize,
        kind: crate::builder::StopKind,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn budget(what: impl Into<String>, needed: impl ToString, budget: u64) -> Self {
        Error::Budget {
            what: what.into(),
            needed: needed.to_string(),
            budget,
        }
    }
}
