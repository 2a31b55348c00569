//! Market data types, implied carry and liquidity-based candidate selection.

mod calendar;
mod io;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use calendar::{last_weekday_of_month, next_weekday_on_or_after, year_fraction, Calendar};
pub use io::MarketData;

use crate::error::{Error, Result};
pub use crate::pricing::OptionKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub kind: OptionKind,
    pub close: f64,
    pub volume: u64,
    pub open_interest: u64,
}

impl OptionQuote {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(format!("strike must be positive, got {}", self.strike));
        }
        if !(self.close.is_finite() && self.close >= 0.0) {
            return Err(format!("close must be non-negative, got {}", self.close));
        }
        if self.expiry < self.trade_date {
            return Err(format!(
                "expiry {} precedes trade date {}",
                self.expiry, self.trade_date
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub as_of: NaiveDate,
    pub spot: f64,
    /// Futures close per listed expiry.
    pub futures: BTreeMap<NaiveDate, f64>,
    pub rate: f64,
    pub quotes: Vec<OptionQuote>,
    pub weekly_expiry: NaiveDate,
    pub monthly_expiry: NaiveDate,
}

impl MarketSnapshot {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::InvalidInput(format!("spot must be positive on {}", self.as_of)));
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidInput(format!("rate not finite on {}", self.as_of)));
        }
        if !(self.as_of <= self.weekly_expiry && self.weekly_expiry <= self.monthly_expiry) {
            return Err(Error::InvalidInput(format!(
                "expiries out of order: as_of {}, weekly {}, monthly {}",
                self.as_of, self.weekly_expiry, self.monthly_expiry
            )));
        }
        Ok(())
    }

    pub fn quotes_for(&self, expiry: NaiveDate) -> impl Iterator<Item = &OptionQuote> {
        self.quotes.iter().filter(move |q| q.expiry == expiry)
    }

    pub fn quote(&self, expiry: NaiveDate, strike: f64, kind: OptionKind) -> Option<&OptionQuote> {
        self.quotes
            .iter()
            .find(|q| q.expiry == expiry && q.kind == kind && q.strike == strike)
    }

    pub fn tenor(&self, expiry: NaiveDate) -> f64 {
        year_fraction(self.as_of, expiry)
    }

    /// Carry implied by the futures close for `expiry`.
    pub fn carry(&self, expiry: NaiveDate) -> Result<Carry> {
        implied_carry(self, expiry)
    }
}

/// Dividend yield `q` and futures-implied return `r' = r - q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Carry {
    pub dividend_yield: f64,
    pub implied_return: f64,
}

pub fn implied_carry(snapshot: &MarketSnapshot, expiry: NaiveDate) -> Result<Carry> {
    let fut = *snapshot.futures.get(&expiry).ok_or_else(|| {
        Error::MissingData(format!(
            "futures close for expiry {expiry} on {}",
            snapshot.as_of
        ))
    })?;
    let tau = snapshot.tenor(expiry);
    if tau <= 0.0 {
        return Err(Error::DegenerateTenor { expiry });
    }
    if !(snapshot.spot > 0.0 && fut > 0.0) {
        return Err(Error::InvalidInput(format!(
            "spot {} and futures {fut} must be positive",
            snapshot.spot
        )));
    }
    let implied_return = (fut / snapshot.spot).ln() / tau;
    Ok(Carry {
        dividend_yield: snapshot.rate - implied_return,
        implied_return,
    })
}

/// Whether liquidity medians pool calls and puts or are taken per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantilePooling {
    #[default]
    Joint,
    PerKind,
}

/// Median volume and open interest thresholds; a quote is liquid when both
/// strictly exceed the thresholds for its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityThresholds {
    pub call_volume: f64,
    pub call_open_interest: f64,
    pub put_volume: f64,
    pub put_open_interest: f64,
}

impl LiquidityThresholds {
    /// Medians over the given quotes (normally one expiry's full chain).
    pub fn from_quotes<'a>(
        quotes: impl IntoIterator<Item = &'a OptionQuote>,
        pooling: QuantilePooling,
    ) -> Self {
        let quotes: Vec<&OptionQuote> = quotes.into_iter().collect();
        let med = |filter: &dyn Fn(&OptionQuote) -> bool| {
            let vol: Vec<f64> = quotes.iter().filter(|q| filter(q)).map(|q| q.volume as f64).collect();
            let oi: Vec<f64> = quotes
                .iter()
                .filter(|q| filter(q))
                .map(|q| q.open_interest as f64)
                .collect();
            (median(vol), median(oi))
        };
        match pooling {
            QuantilePooling::Joint => {
                let (v, oi) = med(&|_| true);
                Self {
                    call_volume: v,
                    call_open_interest: oi,
                    put_volume: v,
                    put_open_interest: oi,
                }
            }
            QuantilePooling::PerKind => {
                let (cv, coi) = med(&|q| q.kind == OptionKind::Call);
                let (pv, poi) = med(&|q| q.kind == OptionKind::Put);
                Self {
                    call_volume: cv,
                    call_open_interest: coi,
                    put_volume: pv,
                    put_open_interest: poi,
                }
            }
        }
    }

    pub fn is_liquid(&self, q: &OptionQuote) -> bool {
        let (v, oi) = match q.kind {
            OptionKind::Call => (self.call_volume, self.call_open_interest),
            OptionKind::Put => (self.put_volume, self.put_open_interest),
        };
        q.volume as f64 > v && q.open_interest as f64 > oi
    }
}

/// Median with linear interpolation between order statistics; NaN when empty.
pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// The strike minimizing |spot/strike - 1|, ties to the lower strike.
pub fn atm_strike(spot: f64, strikes: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for k in strikes {
        let d = (spot / k - 1.0).abs();
        best = match best {
            None => Some((k, d)),
            Some((bk, bd)) if d < bd || (d == bd && k < bk) => Some((k, d)),
            b => b,
        };
    }
    best.map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Selected quotes sorted by (kind, strike).
    pub quotes: Vec<OptionQuote>,
    pub atm_strike: f64,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }
}

/// Liquid ATM/OTM weekly options, with medians over the weekly chain
/// (calls and puts pooled).
pub fn select_candidates(snapshot: &MarketSnapshot) -> Result<CandidateSet> {
    let thresholds = LiquidityThresholds::from_quotes(
        snapshot.quotes_for(snapshot.weekly_expiry),
        QuantilePooling::Joint,
    );
    select_candidates_with(snapshot, snapshot.weekly_expiry, &thresholds)
}

/// Candidate selection for any expiry with externally supplied thresholds,
/// so the filter can be re-applied to a subset with the original medians.
pub fn select_candidates_with(
    snapshot: &MarketSnapshot,
    expiry: NaiveDate,
    thresholds: &LiquidityThresholds,
) -> Result<CandidateSet> {
    let chain: Vec<&OptionQuote> = snapshot.quotes_for(expiry).collect();
    let atm = atm_strike(snapshot.spot, chain.iter().map(|q| q.strike)).ok_or(
        Error::NoLiquidCandidates {
            date: snapshot.as_of,
        },
    )?;
    let mut quotes: Vec<OptionQuote> = chain
        .into_iter()
        .filter(|q| thresholds.is_liquid(q))
        .filter(|q| match q.kind {
            OptionKind::Call => q.strike >= atm,
            OptionKind::Put => q.strike <= atm,
        })
        .copied()
        .collect();
    if quotes.is_empty() {
        return Err(Error::NoLiquidCandidates {
            date: snapshot.as_of,
        });
    }
    quotes.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.strike.total_cmp(&b.strike)));
    quotes.dedup_by(|a, b| a.kind == b.kind && a.strike == b.strike);
    Ok(CandidateSet {
        quotes,
        atm_strike: atm,
    })
}

/// Quotes of `expiry` passing the volume and open-interest filters only.
pub fn liquid_quotes(snapshot: &MarketSnapshot, expiry: NaiveDate, pooling: QuantilePooling) -> Vec<OptionQuote> {
    let thresholds = LiquidityThresholds::from_quotes(snapshot.quotes_for(expiry), pooling);
    snapshot
        .quotes_for(expiry)
        .filter(|q| thresholds.is_liquid(q))
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Moneyness {
    Atm,
    Itm,
    Otm,
}

impl Moneyness {
    pub fn label(self) -> &'static str {
        match self {
            Moneyness::Atm => "ATM",
            Moneyness::Itm => "ITM",
            Moneyness::Otm => "OTM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ATM" => Some(Moneyness::Atm),
            "ITM" => Some(Moneyness::Itm),
            "OTM" => Some(Moneyness::Otm),
            _ => None,
        }
    }

    /// Representative spot/strike level of this class for `kind`.
    pub fn target_level(self, kind: OptionKind) -> f64 {
        match (self, kind) {
            (Moneyness::Atm, _) => 1.0,
            (Moneyness::Otm, OptionKind::Call) | (Moneyness::Itm, OptionKind::Put) => 0.9,
            (Moneyness::Itm, OptionKind::Call) | (Moneyness::Otm, OptionKind::Put) => 1.1,
        }
    }
}

/// Nearest of the levels 0.9 / 1.0 / 1.1 in M = spot/strike; calls read
/// them as OTM / ATM / ITM, puts the other way round. Midpoints go to ATM.
pub fn classify_moneyness(spot: f64, strike: f64, kind: OptionKind) -> Moneyness {
    let m = spot / strike;
    let low_side = if m < 1.0 { (m - 0.9).abs() < (m - 1.0).abs() } else { false };
    let high_side = if m > 1.0 { (m - 1.1).abs() < (m - 1.0).abs() } else { false };
    match (kind, low_side, high_side) {
        (_, false, false) => Moneyness::Atm,
        (OptionKind::Call, true, _) | (OptionKind::Put, _, true) => Moneyness::Otm,
        _ => Moneyness::Itm,
    }
}

/// Listed strike of `expiry` whose moneyness is closest to the class level.
pub fn select_target_strike(
    snapshot: &MarketSnapshot,
    expiry: NaiveDate,
    kind: OptionKind,
    class: Moneyness,
) -> Result<f64> {
    let level = class.target_level(kind);
    let mut best: Option<(f64, f64)> = None;
    for q in snapshot.quotes_for(expiry).filter(|q| q.kind == kind) {
        let d = (snapshot.spot / q.strike - level).abs();
        best = match best {
            None => Some((q.strike, d)),
            Some((bk, bd)) if d < bd || (d == bd && q.strike < bk) => Some((q.strike, d)),
            b => b,
        };
    }
    best.map(|(k, _)| k).ok_or_else(|| {
        Error::MissingData(format!(
            "no {} quotes for expiry {expiry} on {}",
            kind.label(),
            snapshot.as_of
        ))
    })
}
