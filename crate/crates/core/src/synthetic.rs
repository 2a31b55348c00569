//! Synthetic markets in which every instrument is priced by Black-Scholes
//! under a known volatility function, for closed-loop testing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{year_fraction, Calendar, MarketData, OptionKind, OptionQuote};
use crate::pricing::{price_unchecked, BsInputs};
use crate::rng::CounterRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VolProcess {
    Flat {
        vol: f64,
    },
    /// σ(M) = base + curvature·(M − 1)², M = spot/strike.
    Smile {
        base: f64,
        curvature: f64,
    },
    /// σ(τ) = long + (short − long)·exp(−τ/decay), flat in moneyness.
    TermStructure {
        short: f64,
        long: f64,
        decay: f64,
    },
}

impl VolProcess {
    pub fn vol(&self, moneyness: f64, tenor: f64) -> f64 {
        match *self {
            VolProcess::Flat { vol } => vol,
            VolProcess::Smile { base, curvature } => base + curvature * (moneyness - 1.0).powi(2),
            VolProcess::TermStructure { short, long, decay } => {
                long + (short - long) * (-tenor / decay).exp()
            }
        }
    }
}

/// Strike lattice per expiry, fixed from the spot on the listing date: a
/// dense band around the money and a coarse band out to the moneyness limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrikeGrid {
    /// Dense step as a fraction of the initial spot.
    pub dense_step: f64,
    /// Half-width of the dense band as a fraction of the listing spot.
    pub dense_width: f64,
    pub coarse_step: f64,
    pub min_moneyness: f64,
    pub max_moneyness: f64,
}

impl Default for StrikeGrid {
    fn default() -> Self {
        Self {
            dense_step: 0.01,
            dense_width: 0.12,
            coarse_step: 0.05,
            min_moneyness: 0.6,
            max_moneyness: 1.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub spot0: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub vol: VolProcess,
    /// Vol of the spot path; defaults to the ATM one-month vol of `vol`.
    pub spot_vol: Option<f64>,
    /// Extra log-returns applied at the close of the given dates.
    pub jumps: Vec<(NaiveDate, f64)>,
    pub strikes: StrikeGrid,
    pub holidays: Vec<NaiveDate>,
    pub seed: u64,
}

impl Default for WorldSpec {
    /// Flat 20% vol world from the last Thursday of July 2019 to that of July 2020.
    fn default() -> Self {
        Self::flat(
            NaiveDate::from_ymd_opt(2019, 7, 25).expect("valid date"),
            NaiveDate::from_ymd_opt(2020, 7, 30).expect("valid date"),
            0.2,
            0,
        )
    }
}

impl WorldSpec {
    pub fn flat(start: NaiveDate, end: NaiveDate, vol: f64, seed: u64) -> Self {
        Self {
            start,
            end,
            spot0: 10_000.0,
            rate: 0.05,
            dividend_yield: 0.01,
            vol: VolProcess::Flat { vol },
            spot_vol: None,
            jumps: Vec::new(),
            strikes: StrikeGrid::default(),
            holidays: Vec::new(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.end < self.start {
            return Err(Error::InvalidInput("world end precedes start".into()));
        }
        if !(self.spot0 > 0.0 && self.rate.is_finite() && self.dividend_yield.is_finite()) {
            return Err(Error::InvalidInput("world spot must be positive".into()));
        }
        let g = self.strikes;
        if !(g.dense_step > 0.0 && g.coarse_step > 0.0 && g.min_moneyness > 0.0 && g.min_moneyness < g.max_moneyness) {
            return Err(Error::InvalidInput("invalid strike grid".into()));
        }
        for m in [g.min_moneyness, 1.0, g.max_moneyness] {
            for t in [1.0 / 365.0, 0.25, 1.0] {
                if self.vol.vol(m, t) <= 0.0 {
                    return Err(Error::InvalidInput("vol process must stay positive".into()));
                }
            }
        }
        if matches!(self.spot_vol, Some(v) if v < 0.0) {
            return Err(Error::InvalidInput("spot vol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Strikes listed for an expiry when the index is at `listing_spot`.
pub fn strike_lattice(grid: &StrikeGrid, spot0: f64, listing_spot: f64) -> Vec<f64> {
    let dense = grid.dense_step * spot0;
    let coarse = grid.coarse_step * spot0;
    let mut out = BTreeSet::new();
    let mut push_multiples = |step: f64, lo: f64, hi: f64| {
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        for i in first.max(1)..=last {
            // Integer multiples keep strikes exactly representable and shared.
            out.insert((i as f64 * step * 1e6).round() as i64);
        }
    };
    push_multiples(
        dense,
        listing_spot * (1.0 - grid.dense_width),
        listing_spot * (1.0 + grid.dense_width),
    );
    push_multiples(coarse, listing_spot / grid.max_moneyness, listing_spot / grid.min_moneyness);
    out.into_iter().map(|k| k as f64 / 1e6).collect()
}

fn liquidity(spot: f64, strike: f64) -> (u64, u64) {
    let d = (spot / strike).ln().abs();
    let volume = (20_000.0 * (-d / 0.04).exp()).floor() as u64;
    (volume, 2 * volume + 10)
}

/// Generates the market in memory.
pub fn generate_data(spec: &WorldSpec) -> Result<MarketData> {
    spec.validate()?;
    let cal = Calendar::new(spec.holidays.iter().copied());
    let days = cal.business_days(spec.start, spec.end);
    if days.is_empty() {
        return Err(Error::InvalidInput("world window has no business days".into()));
    }
    let spot_vol = spec.spot_vol.unwrap_or_else(|| spec.vol.vol(1.0, 30.0 / 365.0));
    let jumps: BTreeMap<NaiveDate, f64> = spec.jumps.iter().copied().collect();
    let rng = CounterRng::new(spec.seed);
    let drift = spec.rate - spec.dividend_yield;

    let mut spot = BTreeMap::new();
    let mut s = spec.spot0;
    for (i, &d) in days.iter().enumerate() {
        if i > 0 {
            let dt = year_fraction(days[i - 1], d);
            let z = rng.normal(0, i as u64);
            s *= ((drift - 0.5 * spot_vol * spot_vol) * dt + spot_vol * dt.sqrt() * z).exp();
        }
        if let Some(j) = jumps.get(&d) {
            s *= j.exp();
        }
        spot.insert(d, s);
    }

    // Contract schedule: weekly expiries listed on the previous weekly expiry,
    // monthly expiries on the previous monthly expiry.
    let first = *days.first().expect("non-empty");
    let last_day = *days.last().expect("non-empty");
    let mut contracts: BTreeMap<NaiveDate, NaiveDate> = BTreeMap::new();
    for (next, lead) in [
        (Calendar::next_weekly_expiry as fn(&Calendar, NaiveDate) -> NaiveDate, 14),
        (Calendar::next_monthly_expiry, 70),
    ] {
        let mut exps = vec![next(&cal, first - chrono::Duration::days(lead))];
        while *exps.last().expect("non-empty") <= last_day {
            exps.push(next(&cal, *exps.last().expect("non-empty")));
        }
        for w in exps.windows(2) {
            contracts
                .entry(w[1])
                .and_modify(|l| *l = (*l).min(w[0]))
                .or_insert(w[0]);
        }
    }

    // Strike lattice fixed at the listing spot (or the first available spot).
    let listing_spot = |d: NaiveDate| {
        spot.range(..=d)
            .next_back()
            .map(|(_, v)| *v)
            .unwrap_or(spec.spot0)
    };
    let lattices: BTreeMap<NaiveDate, Vec<f64>> = contracts
        .iter()
        .map(|(&exp, &listed)| (exp, strike_lattice(&spec.strikes, spec.spot0, listing_spot(listed))))
        .collect();

    let mut options = BTreeMap::new();
    let mut futures = BTreeMap::new();
    for &d in &days {
        let s = spot[&d];
        let mut quotes = Vec::new();
        let mut fut = BTreeMap::new();
        for (&exp, &listed) in &contracts {
            if d < listed || d > exp {
                continue;
            }
            let tau = year_fraction(d, exp);
            fut.insert(exp, s * (drift * tau).exp());
            for &k in &lattices[&exp] {
                let vol = spec.vol.vol(s / k, tau);
                let (volume, oi) = liquidity(s, k);
                for kind in [OptionKind::Call, OptionKind::Put] {
                    let close = price_unchecked(&BsInputs {
                        spot: s,
                        strike: k,
                        rate: spec.rate,
                        carry_yield: spec.dividend_yield,
                        vol,
                        tenor: tau,
                        kind,
                    });
                    quotes.push(OptionQuote {
                        trade_date: d,
                        expiry: exp,
                        strike: k,
                        kind,
                        close,
                        volume,
                        open_interest: oi,
                    });
                }
            }
        }
        quotes.sort_by(|a, b| {
            a.expiry
                .cmp(&b.expiry)
                .then(a.kind.cmp(&b.kind))
                .then(a.strike.total_cmp(&b.strike))
        });
        options.insert(d, quotes);
        futures.insert(d, fut);
    }

    Ok(MarketData {
        options,
        futures,
        spot,
        rates: BTreeMap::from([(spec.start, spec.rate)]),
        calendar: cal,
    })
}

/// Generates the market and writes it under `root` in the flat-file layout.
pub fn generate(spec: &WorldSpec, root: &Path) -> Result<MarketData> {
    let data = generate_data(spec)?;
    data.write(root)?;
    Ok(data)
}
