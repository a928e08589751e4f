use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a process description (bad index, bad probability).
    #[error("invalid process: {0}")]
    InvalidProcess(String),

    /// The process fails validation (stochasticity, unifilarity or reachability).
    #[error("process failed validation: {0}")]
    Validation(String),

    #[error("process is reducible: no unique stationary distribution")]
    Reducible,

    #[error("process is not Markov (symbol must equal destination state)")]
    NotMarkov,

    #[error("overlap fixed point did not converge within {max_iter} iterations (non-synchronizing process or tolerance too tight)")]
    NotConverged { max_iter: usize },

    #[error("enumeration of {words} words exceeds the limit of {limit}")]
    TooLarge { words: u64, limit: u64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("source and target Gram matrices differ by {mismatch:e}")]
    InconsistentGram { mismatch: f64 },

    #[error("expected a 3-state process, got {states} states")]
    WrongArity { states: usize },

    #[error("no sign branch yields a consistent dimensional certificate")]
    NoBranch,

    #[error("invalid phase assignment: {0}")]
    InvalidPhase(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
