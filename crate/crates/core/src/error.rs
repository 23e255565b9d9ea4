use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("unknown model variant `{0}` (expected one of: aloha-baseline, zigzag-paper, zigzag-strict)")]
    UnknownVariant(String),

    #[error("index {index} outside 0..={max}")]
    IndexOutOfRange { index: i64, max: usize },

    #[error("builder for `{expected}` called with `{found}` parameters")]
    VariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("stationary system is singular; the chain has more than one recurrent class")]
    SingularSystem,

    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("delay undefined: throughput {0} is not positive")]
    UndefinedDelay(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for the CLI: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OutOfRange { .. }
            | Error::UnknownVariant(_)
            | Error::IndexOutOfRange { .. }
            | Error::VariantMismatch { .. }
            | Error::LengthMismatch(..)
            | Error::InvalidConfig(_)
            | Error::Json(_) => 2,
            Error::NotConverged { .. } | Error::SingularSystem | Error::UndefinedDelay(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
