//! Daily PnL attribution: Taylor (greek) components, one-factor marginal
//! revaluations and the unexplained residual, for single options, static
//! portfolios and the delta hedge.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{ols_fit, HedgeBook, ModelSpec};
use crate::error::{Error, Result};
use crate::hedge::{dynamic_pnl, DynamicHedgeState, HedgePortfolio, TargetSpec};
use crate::market_data::{year_fraction, MarketData, OptionKind};
use crate::pricing::{bs_greeks_or_limit, price_unchecked, BsInputs, Greeks};
use crate::vol_surface::VolSurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Spot,
    Vol,
    Time,
}

/// The five greek components of a one-day PnL.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskPnl {
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub volga: f64,
    pub theta: f64,
}

impl RiskPnl {
    pub fn total(&self) -> f64 {
        self.delta + self.gamma + self.vega + self.volga + self.theta
    }
}

/// δ·ΔS + ½γ·ΔS² + ν·Δσ + ½ϑ·Δσ² + Θ/365, with greeks from the previous day
/// and Θ per year.
pub fn risk_pnl(prev: &Greeks, d_spot: f64, d_vol: f64) -> RiskPnl {
    RiskPnl {
        delta: prev.delta * d_spot,
        gamma: 0.5 * prev.gamma * d_spot * d_spot,
        vega: prev.vega * d_vol,
        volga: 0.5 * prev.volga * d_vol * d_vol,
        theta: prev.theta / 365.0,
    }
}

/// Value change from moving one factor to today's level, everything else
/// held at the previous day.
pub fn marginal_pnl(prev: &BsInputs, factor: Factor, today: &BsInputs) -> f64 {
    let moved = match factor {
        Factor::Spot => prev.with_spot(today.spot),
        Factor::Vol => prev.with_vol(today.vol),
        Factor::Time => prev.with_tenor(today.tenor),
    };
    price_unchecked(&moved) - price_unchecked(prev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnlBreakdown {
    pub date: NaiveDate,
    pub full: f64,
    pub delta_pnl: f64,
    pub gamma_pnl: f64,
    pub vega_pnl: f64,
    pub volga_pnl: f64,
    pub theta_pnl: f64,
    /// full − Σ greek components.
    pub unexplained: f64,
    pub marginal_spot: f64,
    pub marginal_vol: f64,
    pub marginal_time: f64,
}

impl PnlBreakdown {
    fn from_parts(date: NaiveDate, full: f64, r: RiskPnl, marginal: [f64; 3]) -> Self {
        Self {
            date,
            full,
            delta_pnl: r.delta,
            gamma_pnl: r.gamma,
            vega_pnl: r.vega,
            volga_pnl: r.volga,
            theta_pnl: r.theta,
            unexplained: full - r.total(),
            marginal_spot: marginal[0],
            marginal_vol: marginal[1],
            marginal_time: marginal[2],
        }
    }

    pub fn zero(date: NaiveDate) -> Self {
        Self::from_parts(date, 0.0, RiskPnl::default(), [0.0; 3])
    }

    pub fn risk(&self) -> RiskPnl {
        RiskPnl {
            delta: self.delta_pnl,
            gamma: self.gamma_pnl,
            vega: self.vega_pnl,
            volga: self.volga_pnl,
            theta: self.theta_pnl,
        }
    }

    /// `self + w·other`; the residual stays consistent with the full PnL.
    pub fn add_scaled(&self, other: &PnlBreakdown, w: f64) -> Self {
        Self {
            date: self.date,
            full: self.full + w * other.full,
            delta_pnl: self.delta_pnl + w * other.delta_pnl,
            gamma_pnl: self.gamma_pnl + w * other.gamma_pnl,
            vega_pnl: self.vega_pnl + w * other.vega_pnl,
            volga_pnl: self.volga_pnl + w * other.volga_pnl,
            theta_pnl: self.theta_pnl + w * other.theta_pnl,
            unexplained: self.unexplained + w * other.unexplained,
            marginal_spot: self.marginal_spot + w * other.marginal_spot,
            marginal_vol: self.marginal_vol + w * other.marginal_vol,
            marginal_time: self.marginal_time + w * other.marginal_time,
        }
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Full => self.full,
            Component::Delta => self.delta_pnl,
            Component::Gamma => self.gamma_pnl,
            Component::DeltaGamma => self.delta_pnl + self.gamma_pnl,
            Component::Vega => self.vega_pnl,
            Component::Volga => self.volga_pnl,
            Component::VegaVolga => self.vega_pnl + self.volga_pnl,
            Component::Theta => self.theta_pnl,
            Component::MarginalSpot => self.marginal_spot,
            Component::MarginalVol => self.marginal_vol,
            Component::MarginalTime => self.marginal_time,
        }
    }
}

/// Breakdown of one option between two days. `full` is the realised PnL
/// (market closes); pass `None` to use the model revaluation.
pub fn option_attribution(
    date: NaiveDate,
    prev: &BsInputs,
    today: &BsInputs,
    full: Option<f64>,
) -> Result<PnlBreakdown> {
    let greeks = bs_greeks_or_limit(prev)?;
    let r = risk_pnl(&greeks, today.spot - prev.spot, today.vol - prev.vol);
    let full = full.unwrap_or_else(|| price_unchecked(today) - price_unchecked(prev));
    Ok(PnlBreakdown::from_parts(
        date,
        full,
        r,
        [
            marginal_pnl(prev, Factor::Spot, today),
            marginal_pnl(prev, Factor::Vol, today),
            marginal_pnl(prev, Factor::Time, today),
        ],
    ))
}

/// One constituent of a static portfolio on a pair of days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstituentDay {
    pub weight: f64,
    pub prev: BsInputs,
    pub today: BsInputs,
    /// Realised PnL per unit; model revaluation when `None`.
    pub full: Option<f64>,
}

/// Weighted sum of constituent breakdowns plus the change in the value of
/// the cash leg, which is booked as time decay (theta and marginal time).
pub fn portfolio_attribution(
    date: NaiveDate,
    constituents: &[ConstituentDay],
    cash_carry: f64,
) -> Result<PnlBreakdown> {
    let mut acc = PnlBreakdown::zero(date);
    for c in constituents {
        let b = option_attribution(date, &c.prev, &c.today, c.full)?;
        acc = acc.add_scaled(&b, c.weight);
    }
    acc.full += cash_carry;
    acc.theta_pnl += cash_carry;
    acc.marginal_time += cash_carry;
    Ok(acc)
}

/// Delta-hedge breakdown: δ·ΔS is the delta component and the money-market
/// accrual is time decay; gamma, vega and volga are zero by construction.
pub fn dynamic_attribution(date: NaiveDate, prev: &DynamicHedgeState, spot_now: f64, rate: f64, days: i64) -> PnlBreakdown {
    let full = dynamic_pnl(prev, spot_now, rate, days);
    let delta = prev.delta * (spot_now - prev.spot);
    let carry = full - delta;
    let r = RiskPnl {
        delta,
        theta: carry,
        ..RiskPnl::default()
    };
    PnlBreakdown::from_parts(date, full, r, [delta, 0.0, carry])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Full,
    Delta,
    Gamma,
    DeltaGamma,
    Vega,
    Volga,
    VegaVolga,
    Theta,
    MarginalSpot,
    MarginalVol,
    MarginalTime,
}

impl Component {
    pub const ALL: [Component; 11] = [
        Component::Full,
        Component::Delta,
        Component::Gamma,
        Component::DeltaGamma,
        Component::Vega,
        Component::Volga,
        Component::VegaVolga,
        Component::Theta,
        Component::MarginalSpot,
        Component::MarginalVol,
        Component::MarginalTime,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    /// Target component had zero variance; no fit.
    pub degenerate: bool,
    pub n: usize,
}

/// OLS of each hedge component on the matching target component, over the
/// dates the two series share.
pub fn attribution_regressions(
    target: &[PnlBreakdown],
    hedge: &[PnlBreakdown],
) -> Result<BTreeMap<Component, ComponentFit>> {
    let by_date: BTreeMap<NaiveDate, &PnlBreakdown> = hedge.iter().map(|b| (b.date, b)).collect();
    let pairs: Vec<(&PnlBreakdown, &PnlBreakdown)> = target
        .iter()
        .filter_map(|t| by_date.get(&t.date).map(|h| (t, *h)))
        .collect();
    if pairs.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "attribution regression needs at least 10 paired days, got {}",
            pairs.len()
        )));
    }
    Ok(Component::ALL
        .iter()
        .map(|&c| {
            let x: Vec<f64> = pairs.iter().map(|(t, _)| t.component(c)).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, h)| h.component(c)).collect();
            let fit = ols_fit(&x, &y);
            (
                c,
                ComponentFit {
                    beta: fit.map(|f| f.beta),
                    r_squared: fit.map(|f| f.r_squared),
                    degenerate: fit.is_none(),
                    n: x.len(),
                },
            )
        })
        .collect())
}

/// Pricing inputs for a listed option on `date` from the day's spot, rate,
/// futures-implied yield of its expiry and its own vol on the day's surface.
pub fn market_inputs(
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
    date: NaiveDate,
    strike: f64,
    kind: OptionKind,
    expiry: NaiveDate,
) -> Result<BsInputs> {
    let spot = data.spot_on(date)?;
    let rate = data.rate_on(date)?;
    let tenor = year_fraction(date, expiry).max(0.0);
    let surface = surfaces
        .get(&date)
        .ok_or_else(|| Error::MissingData(format!("vol surface on {date}")))?;
    let carry_yield = if tenor > 0.0 {
        let fut = data
            .futures
            .get(&date)
            .and_then(|f| f.get(&expiry))
            .ok_or_else(|| Error::MissingData(format!("futures for {expiry} on {date}")))?;
        rate - (fut / spot).ln() / tenor
    } else {
        0.0
    };
    Ok(BsInputs {
        spot,
        strike,
        rate,
        carry_yield,
        vol: surface.vol_at(spot / strike, tenor),
        tenor,
        kind,
    })
}

fn realised(data: &MarketData, prev: NaiveDate, today: NaiveDate, strike: f64, kind: OptionKind, expiry: NaiveDate) -> Option<f64> {
    Some(data.option_close(today, expiry, strike, kind)? - data.option_close(prev, expiry, strike, kind)?)
}

fn require_realised(
    data: &MarketData,
    prev: NaiveDate,
    today: NaiveDate,
    strike: f64,
    kind: OptionKind,
    expiry: NaiveDate,
) -> Result<f64> {
    realised(data, prev, today, strike, kind, expiry).ok_or_else(|| {
        Error::MissingData(format!(
            "closes of {} {strike} expiring {expiry} on {prev} and {today}",
            kind.label()
        ))
    })
}

/// Target breakdown between two trading days; full PnL from closes when both
/// are quoted, otherwise from the model.
pub fn target_attribution(
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
    target: &TargetSpec,
    prev: NaiveDate,
    today: NaiveDate,
) -> Result<PnlBreakdown> {
    let p = market_inputs(data, surfaces, prev, target.strike, target.kind, target.expiry)?;
    let t = market_inputs(data, surfaces, today, target.strike, target.kind, target.expiry)?;
    let full = realised(data, prev, today, target.strike, target.kind, target.expiry);
    option_attribution(today, &p, &t, full)
}

/// Static portfolio breakdown between two days inside its holding period.
pub fn static_attribution(
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
    portfolio: &HedgePortfolio,
    prev: NaiveDate,
    today: NaiveDate,
) -> Result<PnlBreakdown> {
    let constituents = portfolio
        .positions
        .iter()
        .map(|pos| {
            Ok(ConstituentDay {
                weight: pos.weight,
                prev: market_inputs(data, surfaces, prev, pos.strike, pos.kind, portfolio.expiry)?,
                today: market_inputs(data, surfaces, today, pos.strike, pos.kind, portfolio.expiry)?,
                full: Some(require_realised(data, prev, today, pos.strike, pos.kind, portfolio.expiry)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let carry = portfolio.cash_value(today) - portfolio.cash_value(prev);
    portfolio_attribution(today, &constituents, carry)
}

/// Attribution series of the target and of every model in a hedge book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub target: Vec<PnlBreakdown>,
    pub models: BTreeMap<String, Vec<PnlBreakdown>>,
    pub regressions: BTreeMap<String, BTreeMap<Component, ComponentFit>>,
}

impl AttributionReport {
    /// CSV with one row per (date, series).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "date,series,full,delta,gamma,vega,volga,theta,unexplained,marginal_spot,marginal_vol,marginal_time\n",
        );
        let mut row = |name: &str, b: &PnlBreakdown| {
            out.push_str(&format!(
                "{},{name},{},{},{},{},{},{},{},{},{},{}\n",
                b.date,
                b.full,
                b.delta_pnl,
                b.gamma_pnl,
                b.vega_pnl,
                b.volga_pnl,
                b.theta_pnl,
                b.unexplained,
                b.marginal_spot,
                b.marginal_vol,
                b.marginal_time
            ));
        };
        for (i, t) in self.target.iter().enumerate() {
            row("target", t);
            for (id, series) in &self.models {
                if let Some(b) = series.get(i) {
                    row(id, b);
                }
            }
        }
        out
    }
}

/// Attributes every trading-day pair of every cycle in `book`. Each static
/// model is attributed through the portfolio held over the pair.
pub fn attribute_book(
    book: &HedgeBook,
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
) -> Result<AttributionReport> {
    let mut target = Vec::new();
    let mut models: BTreeMap<String, Vec<PnlBreakdown>> = BTreeMap::new();
    for (c, cycle) in book.cycles.iter().enumerate() {
        let days: Vec<NaiveDate> = data.spot.range(cycle.start..=cycle.last_mark).map(|(d, _)| *d).collect();
        for (i, pair) in days.windows(2).enumerate() {
            let (prev, today) = (pair[0], pair[1]);
            target.push(target_attribution(data, surfaces, &cycle.target, prev, today)?);
            let week = cycle.rebalances.iter().rposition(|r| *r <= prev).unwrap_or(0);
            for mh in &book.models {
                let b = match mh.model {
                    ModelSpec::Dynamic { .. } => {
                        let st = &mh.daily[c][i];
                        let days_between = (today - prev).num_days();
                        dynamic_attribution(today, st, data.spot_on(today)?, data.rate_on(prev)?, days_between)
                    }
                    _ => match mh.weekly[c].get(week) {
                        Some(Some(p)) => static_attribution(data, surfaces, p, prev, today)?,
                        _ => PnlBreakdown::zero(today),
                    },
                };
                models.entry(mh.model.id()).or_default().push(b);
            }
        }
    }
    let regressions = models
        .iter()
        .filter(|(_, s)| s.len() >= 10)
        .map(|(id, s)| Ok((id.clone(), attribution_regressions(&target, s)?)))
        .collect::<Result<_>>()?;
    Ok(AttributionReport {
        target,
        models,
        regressions,
    })
}
