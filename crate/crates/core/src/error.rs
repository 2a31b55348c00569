use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::pricing::Greeks;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing data: {0}")]
    MissingData(String),

    #[error("degenerate tenor for expiry {expiry}: time to expiry is zero")]
    DegenerateTenor { expiry: NaiveDate },

    #[error("no liquid candidate options on {date}")]
    NoLiquidCandidates { date: NaiveDate },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Greeks requested with zero vol or zero tenor. The payload carries the
    /// limiting values (delta = intrinsic indicator, everything else zero).
    #[error("degenerate greeks: zero volatility or zero tenor")]
    DegenerateGreeks { greeks: Greeks },

    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper}]")]
    NoImpliedVol { price: f64, lower: f64, upper: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("smile needs at least 2 anchors, found {found}")]
    InsufficientAnchors { found: usize },

    #[error("{}:{row}: {message}", file.display())]
    Parse {
        file: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the market data rather than by caller input.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}
