use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use super::TargetSpec;
use crate::error::{Error, Result};
use crate::market_data::{year_fraction, MarketSnapshot};
use crate::pricing::{bs_greeks_or_limit, price_unchecked, BsInputs};
use crate::vol_surface::VolSurface;

/// Daily delta hedge of the target: δ* units of the index plus a money-market
/// balance V* − δ*·S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicHedgeState {
    pub date: NaiveDate,
    pub spot: f64,
    pub delta: f64,
    pub money_market: f64,
    pub target_value: f64,
    pub vol: f64,
    /// True when the day's surface could not supply a vol and the previous
    /// day's vol was reused.
    pub vol_fallback: bool,
}

/// Rebalances the delta hedge on the snapshot date. The target is marked at
/// its close when quoted, otherwise at the model price. `prev_vol` is used if
/// `surface` is missing.
pub fn rebalance_dynamic(
    snapshot: &MarketSnapshot,
    surface: Option<&VolSurface>,
    target: TargetSpec,
    prev_vol: Option<f64>,
) -> Result<DynamicHedgeState> {
    let tau = year_fraction(snapshot.as_of, target.expiry).max(0.0);
    let moneyness = snapshot.spot / target.strike;
    let (vol, vol_fallback) = match (surface, prev_vol) {
        (Some(s), _) => (s.vol_at(moneyness, tau), false),
        (None, Some(v)) => {
            warn!("no surface on {}; reusing previous delta vol", snapshot.as_of);
            (v, true)
        }
        (None, None) => {
            return Err(Error::MissingData(format!(
                "vol surface for delta hedge on {}",
                snapshot.as_of
            )))
        }
    };
    let carry_yield = if tau > 0.0 {
        snapshot.carry(target.expiry)?.dividend_yield
    } else {
        0.0
    };
    let inputs = BsInputs {
        spot: snapshot.spot,
        strike: target.strike,
        rate: snapshot.rate,
        carry_yield,
        vol,
        tenor: tau,
        kind: target.kind,
    };
    let delta = bs_greeks_or_limit(&inputs)?.delta;
    let target_value = snapshot
        .quote(target.expiry, target.strike, target.kind)
        .map(|q| q.close)
        .unwrap_or_else(|| price_unchecked(&inputs));
    Ok(DynamicHedgeState {
        date: snapshot.as_of,
        spot: snapshot.spot,
        delta,
        money_market: target_value - delta * snapshot.spot,
        target_value,
        vol,
        vol_fallback,
    })
}

/// PnL from holding `prev` until a day with index level `spot_now`,
/// `days` calendar days later: δ·ΔS + (V − δS)(e^{r·days/365} − 1).
pub fn dynamic_pnl(prev: &DynamicHedgeState, spot_now: f64, rate: f64, days: i64) -> f64 {
    prev.delta * (spot_now - prev.spot) + prev.money_market * ((rate * days as f64 / 365.0).exp() - 1.0)
}
