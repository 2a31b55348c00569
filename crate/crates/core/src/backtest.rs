//! Weekly-rebalanced hedging backtest over monthly target cycles.
//!
//! Each cycle runs from one monthly expiry to the next. On the first day a
//! target option is chosen at the universe's moneyness; on that day and on
//! every weekly expiry inside the cycle each static model buys a new
//! portfolio of options expiring the following week. Hedges are marked daily
//! at market closes. The hedge account is the portfolio mark plus a funding
//! balance that accrues at the risk-free rate, receives the expiring
//! portfolio's value and pays for the next one, so daily PnL telescopes.
//!
//! Construction (which needs vol surfaces) and marking (which needs only
//! closes and frozen weights) are separate phases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::{
    build_carr_wu_hedge, dynamic_pnl, rebalance_dynamic, CarrWuConfig, DynamicHedgeState,
    HedgePortfolio, LassoHedgeSettings, PreparedWeek, TargetSpec, DEFAULT_COST_RATE,
};
use crate::lasso::{LassoOptions, PathOptions};
use crate::market_data::{
    select_target_strike, year_fraction, MarketData, MarketSnapshot, Moneyness, OptionKind,
    QuantilePooling,
};
use crate::pricing::{price_unchecked, BsInputs};
use crate::rng::derive_seed;
use crate::simulation::DEFAULT_PATHS;
use crate::vol_surface::{ForwardVolModel, Scheme, VolSurface};

pub const TARGET_ID: &str = "target";
pub const DEFAULT_BENCHMARK: &str = "static/constant_vol/linear";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Static {
        forward: ForwardVolModel,
        scheme: Scheme,
    },
    Dynamic {
        scheme: Scheme,
    },
    CarrWu {
        scheme: Scheme,
    },
}

impl ModelSpec {
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// The sixteen static variants, four dynamic variants and Carr-Wu.
    pub fn full_grid() -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for forward in ForwardVolModel::ALL {
            for scheme in Scheme::ALL {
                out.push(ModelSpec::Static { forward, scheme });
            }
        }
        for scheme in Scheme::ALL {
            out.push(ModelSpec::Dynamic { scheme });
        }
        out.push(ModelSpec::CarrWu {
            scheme: Scheme::Linear,
        });
        out
    }

    fn scheme(&self) -> Scheme {
        match *self {
            ModelSpec::Static { scheme, .. }
            | ModelSpec::Dynamic { scheme }
            | ModelSpec::CarrWu { scheme } => scheme,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Static { forward, scheme } => {
                write!(f, "static/{}/{}", forward.label(), scheme.label())
            }
            ModelSpec::Dynamic { scheme } => write!(f, "dynamic/{}", scheme.label()),
            ModelSpec::CarrWu { scheme } => write!(f, "carr_wu/{}", scheme.label()),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown model id '{s}'"));
        let parts: Vec<&str> = s.split('/').collect();
        let scheme = |p: &str| Scheme::parse(p).ok_or_else(bad);
        match parts.as_slice() {
            ["static", fwd, sch] => Ok(ModelSpec::Static {
                forward: ForwardVolModel::parse(fwd).ok_or_else(bad)?,
                scheme: scheme(sch)?,
            }),
            ["dynamic", sch] => Ok(ModelSpec::Dynamic { scheme: scheme(sch)? }),
            ["carr_wu", sch] => Ok(ModelSpec::CarrWu { scheme: scheme(sch)? }),
            ["carr_wu"] => Ok(ModelSpec::CarrWu {
                scheme: Scheme::Linear,
            }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.id()
    }
}

/// One backtest universe: index label, option kind and initial moneyness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Universe {
    pub index: String,
    pub kind: OptionKind,
    pub moneyness: Moneyness,
}

impl Universe {
    pub fn label(&self) -> String {
        format!("{}:{}:{}", self.index, self.kind.label(), self.moneyness.label())
    }

    /// Parses `INDEX:call|put:ATM|ITM|OTM`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidInput(format!("bad universe '{s}', expected INDEX:call:ATM"));
        if parts.len() != 3 || parts[0].is_empty() {
            return Err(bad());
        }
        Ok(Self {
            index: parts[0].to_string(),
            kind: OptionKind::from_code(&parts[1].to_ascii_lowercase()).ok_or_else(bad)?,
            moneyness: Moneyness::parse(parts[2]).ok_or_else(bad)?,
        })
    }

    /// File-name friendly label.
    pub fn slug(&self) -> String {
        format!("{}_{}_{}", self.index, self.kind.label(), self.moneyness.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    /// 27 Feb 2020 to 20 Jul 2020.
    pub fn covid() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2020, 2, 27).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2020, 7, 20).expect("valid date"),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub cost_rate: f64,
    pub lasso: LassoOptions,
    pub path: PathOptions,
    pub pooling: QuantilePooling,
    pub carr_wu_nodes: usize,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        Self {
            n_paths: DEFAULT_PATHS,
            seed: 0,
            cost_rate: DEFAULT_COST_RATE,
            lasso: LassoOptions::default(),
            path: PathOptions::default(),
            pooling: QuantilePooling::Joint,
            carr_wu_nodes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSpec {
    pub universe: Universe,
    pub window: Window,
    pub models: Vec<ModelSpec>,
    pub settings: BacktestSettings,
}

/// One monthly target cycle and its weekly rebalance dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: NaiveDate,
    pub target: TargetSpec,
    /// Rebalance dates; week i runs from `rebalances[i]` to the next one (or
    /// the target expiry for the last week). Weeks starting on or after
    /// `last_mark` are never built.
    pub rebalances: Vec<NaiveDate>,
    /// Last mark date (the target expiry, or the window end if earlier).
    pub last_mark: NaiveDate,
}

impl Cycle {
    pub fn week_end(&self, i: usize) -> NaiveDate {
        self.rebalances
            .get(i + 1)
            .copied()
            .unwrap_or(self.target.expiry)
    }
}

/// Monthly cycles covered by the window, with targets chosen on each start.
pub fn schedule(data: &MarketData, universe: &Universe, window: Window) -> Result<Vec<Cycle>> {
    let cal = &data.calendar;
    let mut start = cal.next_monthly_expiry(window.start.pred_opt().expect("date in range"));
    let mut cycles = Vec::new();
    while start < window.end {
        let expiry = cal.next_monthly_expiry(start);
        let mut rebalances = vec![start];
        rebalances.extend(cal.weekly_expiries(start, expiry).into_iter().filter(|e| *e < expiry));
        let snap = data.snapshot(start, rebalances.get(1).copied().unwrap_or(expiry), expiry)?;
        let strike = select_target_strike(&snap, expiry, universe.kind, universe.moneyness)?;
        cycles.push(Cycle {
            start,
            target: TargetSpec {
                strike,
                kind: universe.kind,
                expiry,
            },
            rebalances,
            last_mark: expiry.min(window.end),
        });
        start = expiry;
    }
    if cycles.is_empty() {
        return Err(Error::InvalidInput(format!(
            "window {}..{} contains no monthly expiry to start a cycle",
            window.start, window.end
        )));
    }
    Ok(cycles)
}

/// Daily calibrated surfaces for every trading day in `[start, end]`, using
/// all expiries listed that day. Days where calibration fails are omitted.
pub fn calibrate_surfaces(
    data: &MarketData,
    start: NaiveDate,
    end: NaiveDate,
    pooling: QuantilePooling,
) -> BTreeMap<NaiveDate, VolSurface> {
    let days: Vec<NaiveDate> = data.spot.range(start..=end).map(|(d, _)| *d).collect();
    days.par_iter()
        .filter_map(|&d| match calibrate_day(data, d, pooling) {
            Ok(s) => Some((d, s)),
            Err(e) => {
                warn!("surface calibration failed on {d}: {e}");
                None
            }
        })
        .collect()
}

pub fn calibrate_day(data: &MarketData, date: NaiveDate, pooling: QuantilePooling) -> Result<VolSurface> {
    let futures = data
        .futures
        .get(&date)
        .ok_or_else(|| Error::MissingData(format!("futures on {date}")))?;
    let expiries: Vec<NaiveDate> = futures.keys().copied().filter(|e| *e > date).collect();
    let (first, last) = match (expiries.first(), expiries.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::MissingData(format!("listed expiries on {date}"))),
    };
    let snap = data.snapshot(date, first, last)?;
    let mut smiles = Vec::new();
    for e in expiries {
        match crate::vol_surface::build_smile(&snap, e, pooling) {
            Ok(anchors) => smiles.push(crate::vol_surface::TenorSmile {
                tenor: year_fraction(date, e),
                anchors,
            }),
            Err(err) => warn!("no smile for expiry {e} on {date}: {err}"),
        }
    }
    VolSurface::new(date, Scheme::Linear, smiles)
}

/// Frozen hedges for every model, produced by the construction phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeBook {
    pub universe: Universe,
    pub window: Window,
    pub cycles: Vec<Cycle>,
    pub cost_rate: f64,
    pub models: Vec<ModelHedges>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHedges {
    pub model: ModelSpec,
    /// Static models: one portfolio per (cycle, week); `None` when the
    /// week's build failed and the account stayed in cash.
    pub weekly: Vec<Vec<Option<HedgePortfolio>>>,
    /// Dynamic models: daily hedge states per cycle (cycle start included).
    pub daily: Vec<Vec<DynamicHedgeState>>,
    pub warnings: Vec<String>,
}

fn snapshot_for_week(data: &MarketData, cycle: &Cycle, week: usize) -> Result<MarketSnapshot> {
    data.snapshot(cycle.rebalances[week], cycle.week_end(week), cycle.target.expiry)
}

/// Construction phase: builds every model's hedges from daily surfaces.
pub fn build_hedges(
    spec: &BacktestSpec,
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
) -> Result<HedgeBook> {
    if spec.models.is_empty() {
        return Err(Error::InvalidInput("model list is empty".into()));
    }
    let cycles = schedule(data, &spec.universe, spec.window)?;
    let s = &spec.settings;
    let mut models: Vec<ModelHedges> = spec
        .models
        .iter()
        .map(|m| ModelHedges {
            model: *m,
            weekly: Vec::new(),
            daily: Vec::new(),
            warnings: Vec::new(),
        })
        .collect();

    for cycle in &cycles {
        let mut weeks: Vec<Vec<Option<HedgePortfolio>>> = vec![Vec::new(); models.len()];
        let live_weeks = cycle.rebalances.iter().filter(|d| **d < cycle.last_mark).count();
        for week in 0..live_weeks {
            let date = cycle.rebalances[week];
            let snap = snapshot_for_week(data, cycle, week)?;
            let base = surfaces.get(&date);
            let lasso_settings = LassoHedgeSettings {
                n_paths: s.n_paths,
                seed: derive_seed(s.seed, date.num_days_from_ce() as u64),
                lasso: s.lasso,
                path: s.path,
                cost_rate: s.cost_rate,
                pooling: s.pooling,
            };
            // Scenario sets are shared by every forward-vol model on one scheme.
            let schemes: Vec<Scheme> = {
                let mut v: Vec<Scheme> = spec
                    .models
                    .iter()
                    .filter(|m| matches!(m, ModelSpec::Static { .. }))
                    .map(|m| m.scheme())
                    .collect();
                v.sort();
                v.dedup();
                v
            };
            let prepared: BTreeMap<Scheme, Result<(VolSurface, PreparedWeek)>> = schemes
                .par_iter()
                .map(|&sch| {
                    let r = (|| {
                        let surf = base
                            .ok_or_else(|| Error::MissingData(format!("vol surface on {date}")))?
                            .with_scheme(sch)?;
                        let prep = PreparedWeek::prepare(&snap, &surf, cycle.target, &lasso_settings)?;
                        Ok((surf, prep))
                    })();
                    (sch, r)
                })
                .collect();
            let built: Vec<std::result::Result<Option<HedgePortfolio>, String>> = spec
                .models
                .par_iter()
                .map(|m| match *m {
                    ModelSpec::Static { forward, scheme } => match &prepared[&scheme] {
                        Ok((surf, prep)) => prep
                            .build(surf, forward)
                            .map(|h| Some(h.portfolio))
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    },
                    ModelSpec::CarrWu { scheme } => {
                        let r = (|| {
                            let surf = base
                                .ok_or_else(|| Error::MissingData(format!("vol surface on {date}")))?
                                .with_scheme(scheme)?;
                            let cfg = CarrWuConfig {
                                n_nodes: s.carr_wu_nodes,
                                cost_rate: s.cost_rate,
                                pooling: s.pooling,
                                ..CarrWuConfig::default()
                            };
                            build_carr_wu_hedge(&snap, &surf, cycle.target, &cfg)
                        })();
                        r.map(Some).map_err(|e| e.to_string())
                    }
                    ModelSpec::Dynamic { .. } => Ok(None),
                })
                .collect();
            for (i, b) in built.into_iter().enumerate() {
                match b {
                    Ok(p) => weeks[i].push(p),
                    Err(e) => {
                        let msg = format!("{}: hedge build failed on {date}: {e}", models[i].model);
                        warn!("{msg}");
                        models[i].warnings.push(msg);
                        weeks[i].push(None);
                    }
                }
            }
        }
        for (m, w) in models.iter_mut().zip(weeks) {
            m.weekly.push(w);
        }

        // Dynamic hedges rebalance on every trading day of the cycle.
        let days: Vec<NaiveDate> = data
            .spot
            .range(cycle.start..=cycle.last_mark)
            .map(|(d, _)| *d)
            .collect();
        for m in models.iter_mut() {
            let ModelSpec::Dynamic { scheme } = m.model else {
                m.daily.push(Vec::new());
                continue;
            };
            let mut states = Vec::with_capacity(days.len());
            let mut prev_vol = None;
            for &d in &days {
                let snap = data.snapshot(
                    d,
                    cycle.target.expiry.min(data.calendar.next_weekly_expiry(d)),
                    cycle.target.expiry,
                )?;
                let surf = match surfaces.get(&d).map(|s| s.with_scheme(scheme)) {
                    Some(Ok(s)) => Some(s),
                    _ => None,
                };
                let st = rebalance_dynamic(&snap, surf.as_ref(), cycle.target, prev_vol)?;
                if st.vol_fallback {
                    m.warnings.push(format!("{}: reused previous delta vol on {d}", m.model));
                }
                prev_vol = Some(st.vol);
                states.push(st);
            }
            m.daily.push(states);
        }
    }
    Ok(HedgeBook {
        universe: spec.universe.clone(),
        window: spec.window,
        cycles,
        cost_rate: spec.settings.cost_rate,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnlSeries {
    pub model_id: String,
    pub dates: Vec<NaiveDate>,
    pub pnl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub universe: Universe,
    pub target: PnlSeries,
    pub models: Vec<PnlSeries>,
    /// Dates on which the target had no quote and was marked by model.
    pub target_model_marks: Vec<NaiveDate>,
    pub warnings: Vec<String>,
}

impl BacktestResult {
    pub fn model(&self, id: &str) -> Option<&PnlSeries> {
        self.models.iter().find(|m| m.model_id == id)
    }

    /// Hedge error series ΔV − ΔG for one model.
    pub fn hedge_errors(&self, id: &str) -> Option<Vec<f64>> {
        self.model(id).map(|m| {
            self.target
                .pnl
                .iter()
                .zip(&m.pnl)
                .map(|(v, g)| v - g)
                .collect()
        })
    }

    /// Long-format CSV: `date,target_pnl,model_id,model_pnl,hedge_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,target_pnl,model_id,model_pnl,hedge_error\n");
        for (i, d) in self.target.dates.iter().enumerate() {
            let v = self.target.pnl[i];
            for m in &self.models {
                let g = m.pnl[i];
                out.push_str(&format!("{d},{v},{},{g},{}\n", m.model_id, v - g));
            }
        }
        out
    }

    /// Per-model hedge-error RMSE and OLS fit of hedge PnL on target PnL.
    pub fn summary(&self) -> BacktestSummary {
        let models = self
            .models
            .iter()
            .map(|m| {
                let err: Vec<f64> = self.target.pnl.iter().zip(&m.pnl).map(|(v, g)| v - g).collect();
                let rmse = (err.iter().map(|e| e * e).sum::<f64>() / err.len().max(1) as f64).sqrt();
                let fit = ols_fit(&self.target.pnl, &m.pnl);
                (
                    m.model_id.clone(),
                    ModelSummary {
                        rmse,
                        mean_abs_error: err.iter().map(|e| e.abs()).sum::<f64>() / err.len().max(1) as f64,
                        beta: fit.map(|f| f.beta),
                        r_squared: fit.map(|f| f.r_squared),
                        n: err.len(),
                    },
                )
            })
            .collect();
        BacktestSummary {
            universe: self.universe.label(),
            models,
            target_model_marks: self.target_model_marks.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub rmse: f64,
    pub mean_abs_error: f64,
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub universe: String,
    pub models: BTreeMap<String, ModelSummary>,
    pub target_model_marks: Vec<NaiveDate>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// OLS of `y` on `x` with intercept; `None` if `x` has zero variance or
/// there are fewer than two points.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Option<OlsFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let beta = sxy / sxx;
    let r_squared = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
    Some(OlsFit {
        beta,
        intercept: my - beta * mx,
        r_squared,
    })
}

/// Target value on `date`: its close, or the model price from the day's surface.
fn target_value(
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
    target: &TargetSpec,
    date: NaiveDate,
    flagged: &mut Vec<NaiveDate>,
) -> Result<f64> {
    if let Some(c) = data.option_close(date, target.expiry, target.strike, target.kind) {
        return Ok(c);
    }
    let spot = data.spot_on(date)?;
    let tau = year_fraction(date, target.expiry);
    let value = if tau <= 0.0 {
        target.kind.payoff(spot, target.strike)
    } else {
        let surface = surfaces.get(&date).ok_or_else(|| {
            Error::MissingData(format!(
                "close of target {} {} {} on {date} and no surface to price it",
                target.kind.label(),
                target.strike,
                target.expiry
            ))
        })?;
        let fut = data
            .futures
            .get(&date)
            .and_then(|f| f.get(&target.expiry))
            .ok_or_else(|| Error::MissingData(format!("futures for {} on {date}", target.expiry)))?;
        let rate = data.rate_on(date)?;
        price_unchecked(&BsInputs {
            spot,
            strike: target.strike,
            rate,
            carry_yield: rate - (fut / spot).ln() / tau,
            vol: surface.vol_at(spot / target.strike, tau),
            tenor: tau,
            kind: target.kind,
        })
    };
    flagged.push(date);
    Ok(value)
}

/// Mark of a static portfolio on `date` from market closes.
pub fn portfolio_mark(data: &MarketData, p: &HedgePortfolio, date: NaiveDate) -> Result<f64> {
    let mut total = p.cash_value(date);
    for pos in &p.positions {
        let close = data
            .option_close(date, p.expiry, pos.strike, pos.kind)
            .ok_or_else(|| {
                Error::MissingData(format!(
                    "close of {} {} expiring {} on {date}",
                    pos.kind.label(),
                    pos.strike,
                    p.expiry
                ))
            })?;
        total += pos.weight * close;
    }
    Ok(total)
}

/// Marking phase: daily PnL from closes and the frozen hedges. `surfaces`
/// is consulted only to price the target on days it has no quote.
pub fn mark(
    book: &HedgeBook,
    data: &MarketData,
    surfaces: &BTreeMap<NaiveDate, VolSurface>,
) -> Result<BacktestResult> {
    let mut dates = Vec::new();
    let mut target_pnl = Vec::new();
    let mut flagged = Vec::new();
    let mut model_pnl: Vec<Vec<f64>> = vec![Vec::new(); book.models.len()];
    let mut warnings: Vec<String> = book.models.iter().flat_map(|m| m.warnings.clone()).collect();

    // Static accounts carry (funding, portfolio) across cycles.
    let mut funding = vec![0.0; book.models.len()];

    for (c, cycle) in book.cycles.iter().enumerate() {
        let days: Vec<NaiveDate> = data
            .spot
            .range(cycle.start..=cycle.last_mark)
            .map(|(d, _)| *d)
            .collect();
        if days.first() != Some(&cycle.start) {
            return Err(Error::MissingData(format!("spot close on cycle start {}", cycle.start)));
        }
        // Setup-day row: only the first cycle needs one; later cycles start
        // on the previous cycle's last mark, whose row already exists.
        let mut prev_target = target_value(data, surfaces, &cycle.target, cycle.start, &mut flagged)?;
        let first_row = dates.last() != Some(&cycle.start);
        if first_row {
            dates.push(cycle.start);
            target_pnl.push(0.0);
            for p in model_pnl.iter_mut() {
                p.push(0.0);
            }
        }
        let row0 = dates.len() - 1;

        for (m, mh) in book.models.iter().enumerate() {
            match mh.model {
                ModelSpec::Dynamic { .. } => {
                    let states = &mh.daily[c];
                    for (i, d) in days.iter().enumerate().skip(1) {
                        let prev = &states[i - 1];
                        let rate = data.rate_on(prev.date)?;
                        let days_between = (*d - prev.date).num_days();
                        let s_now = data.spot_on(*d)?;
                        model_pnl[m].push(dynamic_pnl(prev, s_now, rate, days_between));
                    }
                }
                _ => {
                    let weeks = &mh.weekly[c];
                    let mut held: Option<&HedgePortfolio> = None;
                    let mut prev_mark = 0.0;
                    let mut week = 0;
                    let mut prev_day = cycle.start;
                    // Setup at the cycle start: pay for the first portfolio.
                    if let Some(Some(p)) = weeks.first() {
                        let mtm = portfolio_mark(data, p, cycle.start)?;
                        funding[m] -= mtm + p.transaction_cost(book.cost_rate);
                        model_pnl[m][row0] -= p.transaction_cost(book.cost_rate);
                        held = Some(p);
                        prev_mark = mtm;
                    }
                    for &d in days.iter().skip(1) {
                        let rate = data.rate_on(prev_day)?;
                        let accrual = funding[m] * ((rate * (d - prev_day).num_days() as f64 / 365.0).exp() - 1.0);
                        funding[m] += accrual;
                        let mark_now = match held {
                            Some(p) => portfolio_mark(data, p, d)?,
                            None => 0.0,
                        };
                        let mut pnl = mark_now - prev_mark + accrual;
                        prev_mark = mark_now;
                        // Weekly expiry inside the cycle: roll into the next portfolio.
                        if week + 1 < cycle.rebalances.len() && d == cycle.rebalances[week + 1] {
                            funding[m] += prev_mark;
                            prev_mark = 0.0;
                            held = None;
                            week += 1;
                            if let Some(Some(p)) = weeks.get(week) {
                                let mtm = portfolio_mark(data, p, d)?;
                                let tc = p.transaction_cost(book.cost_rate);
                                funding[m] -= mtm + tc;
                                pnl -= tc;
                                held = Some(p);
                                prev_mark = mtm;
                            }
                        }
                        model_pnl[m].push(pnl);
                        prev_day = d;
                    }
                    // Cycle end: the last portfolio expires into funding.
                    funding[m] += prev_mark;
                }
            }
        }
        for &d in days.iter().skip(1) {
            let v = target_value(data, surfaces, &cycle.target, d, &mut flagged)?;
            dates.push(d);
            target_pnl.push(v - prev_target);
            prev_target = v;
        }
    }
    if !flagged.is_empty() {
        warnings.push(format!("target marked by model on {} day(s)", flagged.len()));
    }
    let models = book
        .models
        .iter()
        .zip(model_pnl)
        .map(|(mh, pnl)| PnlSeries {
            model_id: mh.model.id(),
            dates: dates.clone(),
            pnl,
        })
        .collect();
    Ok(BacktestResult {
        universe: book.universe.clone(),
        target: PnlSeries {
            model_id: TARGET_ID.to_string(),
            dates,
            pnl: target_pnl,
        },
        models,
        target_model_marks: flagged,
        warnings,
    })
}

/// Full backtest: daily surfaces, hedge construction, then marking.
pub fn run(spec: &BacktestSpec, data: &MarketData) -> Result<(HedgeBook, BacktestResult)> {
    let data = data.restrict(spec.window.start, spec.window.end.max(spec.window.start));
    let surfaces = calibrate_surfaces(&data, spec.window.start, spec.window.end, spec.settings.pooling);
    let book = build_hedges(spec, &data, &surfaces)?;
    let result = mark(&book, &data, &surfaces)?;
    Ok((book, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_ids_round_trip() {
        for m in ModelSpec::full_grid() {
            assert_eq!(m.id().parse::<ModelSpec>().unwrap(), m);
        }
        assert_eq!(ModelSpec::full_grid().len(), 21);
        assert!("static/foo/linear".parse::<ModelSpec>().is_err());
        assert_eq!(DEFAULT_BENCHMARK.parse::<ModelSpec>().unwrap().id(), DEFAULT_BENCHMARK);
    }

    #[test]
    fn universe_parse() {
        let u = Universe::parse("NIFTY:call:ATM").unwrap();
        assert_eq!(u.kind, OptionKind::Call);
        assert_eq!(u.moneyness, Moneyness::Atm);
        assert_eq!(u.label(), "NIFTY:call:ATM");
        assert!(Universe::parse("NIFTY:call").is_err());
    }

    #[test]
    fn ols_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 1.0).collect();
        let f = ols_fit(&x, &y).unwrap();
        assert!((f.beta - 0.5).abs() < 1e-15 && (f.r_squared - 1.0).abs() < 1e-15);
        assert!(ols_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }
}
