//! Semi-static hedging of longer-dated index options with portfolios of
//! liquid short-dated options.

pub mod attribution;
pub mod backtest;
pub mod error;
pub mod hedge;
pub mod lasso;
pub mod market_data;
pub mod math;
pub mod pricing;
pub mod rng;
pub mod simulation;
pub mod spa;
pub mod synthetic;
pub mod vol_surface;

pub use error::{Error, Result};
