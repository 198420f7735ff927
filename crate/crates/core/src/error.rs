use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("exact knapsack supports at most {cap} items, got {n}")]
    KnapsackTooLarge { n: usize, cap: usize },

    #[error("operation precondition violated: {0}")]
    Precondition(String),

    #[error("coalition formation did not converge within {cap} iterations")]
    IterationCap { cap: usize, dump: String },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("structure is not stable: {0}")]
    NotStable(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParam { .. } => "invalid_param",
            Error::Dimension(_) => "dimension",
            Error::KnapsackTooLarge { .. } => "knapsack_too_large",
            Error::Precondition(_) => "precondition",
            Error::IterationCap { .. } => "iteration_cap",
            Error::UnknownMode(_) => "unknown_mode",
            Error::NotStable(_) => "not_stable",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
