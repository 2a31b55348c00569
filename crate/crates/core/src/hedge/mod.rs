//! Hedge construction: lasso static hedge, Carr-Wu quadrature hedge and the
//! daily delta hedge.

mod carr_wu;
mod dynamic;
mod lasso_hedge;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use carr_wu::{build_carr_wu_hedge, carr_wu_strikes, gauss_hermite, CarrWuConfig, CarrWuNode};
pub use dynamic::{dynamic_pnl, rebalance_dynamic, DynamicHedgeState};
pub use lasso_hedge::{
    build_lasso_hedge, LassoHedge, LassoHedgeSettings, PreparedWeek,
};

use crate::market_data::{year_fraction, OptionKind};

/// Proportional transaction cost per unit of premium (5 bps).
pub const DEFAULT_COST_RATE: f64 = 0.0005;

/// The longer-dated option being hedged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub strike: f64,
    pub kind: OptionKind,
    pub expiry: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub strike: f64,
    pub kind: OptionKind,
    pub weight: f64,
    /// Unit premium paid at setup.
    pub price: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HedgeDiagnostics {
    pub in_sample_mae: Option<f64>,
    pub in_sample_rmse: Option<f64>,
    pub lambda: Option<f64>,
    pub n_nonzero: Option<usize>,
    pub warnings: Vec<String>,
}

/// Static portfolio of short-dated options plus cash, held to `expiry`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgePortfolio {
    pub as_of: NaiveDate,
    pub expiry: NaiveDate,
    pub positions: Vec<Position>,
    /// Cash notional paid at `expiry`.
    pub cash: f64,
    pub rate: f64,
    /// Premium outlay including transaction costs, plus discounted cash.
    pub setup_cost: f64,
    pub diagnostics: HedgeDiagnostics,
}

impl HedgePortfolio {
    /// Σ w·p + c·Σ|w|·p + cash·e^{-r(T1-T0)}.
    pub fn compute_setup_cost(
        positions: &[Position],
        cash: f64,
        rate: f64,
        as_of: NaiveDate,
        expiry: NaiveDate,
        cost_rate: f64,
    ) -> f64 {
        let premium: f64 = positions.iter().map(|p| p.weight * p.price).sum();
        let costs: f64 = positions.iter().map(|p| p.weight.abs() * p.price).sum::<f64>() * cost_rate;
        premium + costs + cash * (-rate * year_fraction(as_of, expiry)).exp()
    }

    /// Discounted value of the cash leg on `date`.
    pub fn cash_value(&self, date: NaiveDate) -> f64 {
        self.cash * (-self.rate * year_fraction(date, self.expiry).max(0.0)).exp()
    }

    /// Value on `date` given each position's unit price.
    pub fn value_with(&self, date: NaiveDate, mut price: impl FnMut(&Position) -> f64) -> f64 {
        self.positions.iter().map(|p| p.weight * price(p)).sum::<f64>() + self.cash_value(date)
    }

    /// Value at the short expiry for index level `spot`.
    pub fn payoff(&self, spot: f64) -> f64 {
        self.positions
            .iter()
            .map(|p| p.weight * p.kind.payoff(spot, p.strike))
            .sum::<f64>()
            + self.cash
    }

    /// Transaction cost charged at setup.
    pub fn transaction_cost(&self, cost_rate: f64) -> f64 {
        self.positions.iter().map(|p| p.weight.abs() * p.price).sum::<f64>() * cost_rate
    }
}
