use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate score for metric {metric:?}, system {system:?}, input {input:?}")]
    DuplicateScore {
        metric: String,
        system: String,
        input: String,
    },

    #[error("metric {metric:?} is missing {count} cell(s), first: system {system:?}, input {input:?}")]
    MissingCells {
        metric: String,
        count: usize,
        system: String,
        input: String,
    },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("no complete data left for metric {0:?} after alignment")]
    EmptyAfterAlignment(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("all {0} resamples were degenerate")]
    AllResamplesDegenerate(usize),

    #[error("retry budget exhausted: {0}")]
    RetryBudgetExhausted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
