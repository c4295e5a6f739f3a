//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),

    #[error("bandwidth must be positive")]
    NonPositiveBandwidth,

    #[error("binary response is all zeros or all ones")]
    DegenerateResponse,

    #[error("at least two posterior draws are required")]
    RequiresTwoDraws,

    #[error("delta matrix needs at least two rows")]
    TooFewRows,

    #[error("delta matrix needs at least two columns")]
    TooFewCols,

    #[error("curve design is rank deficient: fewer than four distinct treatment values")]
    RankDeficientCurve,

    #[error("bootstrap resample kept producing single-arm treatment after {0} attempts")]
    DegenerateBootstrap(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::Data(_)
            | Error::ZeroVarianceColumn(_)
            | Error::DegenerateResponse
            | Error::Csv(_)
            | Error::Io(_) => 3,
            _ => 4,
        }
    }

    /// Short machine-readable kind tag for error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVarianceColumn(_) => "zero_variance_column",
            Error::NonPositiveBandwidth => "non_positive_bandwidth",
            Error::DegenerateResponse => "degenerate_response",
            Error::RequiresTwoDraws => "requires_two_draws",
            Error::TooFewRows => "too_few_rows",
            Error::TooFewCols => "too_few_cols",
            Error::RankDeficientCurve => "rank_deficient_curve",
            Error::DegenerateBootstrap(_) => "degenerate_bootstrap",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Data(_) => "invalid_data",
            Error::Numeric(_) => "numeric_failure",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
