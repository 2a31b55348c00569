//! Implied-volatility smiles per tenor, interpolation in moneyness and
//! total variance, and forward-volatility models for the target option.

mod interp;

use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

pub use interp::{Scheme, MIN_VOL};
use interp::Interpolant;

use crate::error::{Error, Result};
use crate::market_data::{
    atm_strike, implied_carry, liquid_quotes, year_fraction, MarketSnapshot, OptionKind,
    OptionQuote, QuantilePooling,
};
use crate::pricing::{implied_vol, BsInputs};

/// Floor applied to forward variance before taking the square root.
pub const FORWARD_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileAnchor {
    /// Spot divided by strike.
    pub moneyness: f64,
    pub vol: f64,
}

/// Implied-vol anchors from a set of quotes sharing one expiry: OTM calls
/// (M < 1), OTM puts (M > 1) and the ATM strike with call and put vols
/// averaged. Quotes whose price admits no implied vol are skipped.
pub fn anchors_from_quotes(
    spot: f64,
    rate: f64,
    dividend_yield: f64,
    tenor: f64,
    quotes: &[OptionQuote],
) -> Result<Vec<SmileAnchor>> {
    let Some(atm) = atm_strike(spot, quotes.iter().map(|q| q.strike)) else {
        return Err(Error::InsufficientAnchors { found: 0 });
    };
    let iv = |q: &OptionQuote| {
        let x = BsInputs {
            spot,
            strike: q.strike,
            rate,
            carry_yield: dividend_yield,
            vol: 0.0,
            tenor,
            kind: q.kind,
        };
        match implied_vol(q.close, &x) {
            Ok(v) => Some(v),
            Err(e) => {
                log::debug!("skipping {} {} @ {}: {e}", q.kind.label(), q.strike, q.expiry);
                None
            }
        }
    };
    let mut anchors = Vec::new();
    let mut atm_vols = Vec::new();
    for q in quotes {
        let otm = match q.kind {
            OptionKind::Call => q.strike > atm,
            OptionKind::Put => q.strike < atm,
        };
        if q.strike == atm {
            atm_vols.extend(iv(q));
        } else if otm {
            if let Some(v) = iv(q) {
                anchors.push(SmileAnchor {
                    moneyness: spot / q.strike,
                    vol: v,
                });
            }
        }
    }
    if !atm_vols.is_empty() {
        anchors.push(SmileAnchor {
            moneyness: spot / atm,
            vol: atm_vols.iter().sum::<f64>() / atm_vols.len() as f64,
        });
    }
    anchors.sort_by(|a, b| a.moneyness.total_cmp(&b.moneyness));
    anchors.dedup_by(|a, b| a.moneyness == b.moneyness);
    if anchors.len() < 2 {
        return Err(Error::InsufficientAnchors {
            found: anchors.len(),
        });
    }
    Ok(anchors)
}

/// Smile for `expiry` from the snapshot's liquid quotes, with carry implied by
/// the futures of the same expiry.
pub fn build_smile(
    snapshot: &MarketSnapshot,
    expiry: NaiveDate,
    pooling: QuantilePooling,
) -> Result<Vec<SmileAnchor>> {
    let carry = implied_carry(snapshot, expiry)?;
    let quotes = liquid_quotes(snapshot, expiry, pooling);
    anchors_from_quotes(
        snapshot.spot,
        snapshot.rate,
        carry.dividend_yield,
        snapshot.tenor(expiry),
        &quotes,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenorSmile {
    pub tenor: f64,
    pub anchors: Vec<SmileAnchor>,
}

/// Calibrated surface Σ(T0; M, τ). Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSurface {
    as_of: NaiveDate,
    scheme: Scheme,
    smiles: Vec<TenorSmile>,
    interps: Vec<Interpolant>,
}

#[derive(Serialize, Deserialize)]
struct SurfaceDump {
    as_of: NaiveDate,
    scheme: Scheme,
    tenors: Vec<TenorDump>,
}

#[derive(Serialize, Deserialize)]
struct TenorDump {
    tenor: f64,
    moneyness: Vec<f64>,
    vol: Vec<f64>,
}

impl VolSurface {
    pub fn new(as_of: NaiveDate, scheme: Scheme, mut smiles: Vec<TenorSmile>) -> Result<Self> {
        if smiles.is_empty() {
            return Err(Error::InsufficientAnchors { found: 0 });
        }
        smiles.sort_by(|a, b| a.tenor.total_cmp(&b.tenor));
        for w in smiles.windows(2) {
            if w[0].tenor == w[1].tenor {
                return Err(Error::InvalidInput(format!("duplicate tenor {}", w[0].tenor)));
            }
        }
        let mut interps = Vec::with_capacity(smiles.len());
        for s in &smiles {
            if !(s.tenor.is_finite() && s.tenor > 0.0) {
                return Err(Error::InvalidInput(format!("tenor must be positive, got {}", s.tenor)));
            }
            let ok = s
                .anchors
                .iter()
                .all(|a| a.moneyness > 0.0 && a.vol > 0.0 && a.vol.is_finite());
            let sorted = s.anchors.windows(2).all(|w| w[0].moneyness < w[1].moneyness);
            if !ok || !sorted {
                return Err(Error::InvalidInput(format!(
                    "anchors for tenor {} must be positive and strictly increasing in moneyness",
                    s.tenor
                )));
            }
            let x: Vec<f64> = s.anchors.iter().map(|a| a.moneyness).collect();
            let y: Vec<f64> = s.anchors.iter().map(|a| a.vol).collect();
            interps.push(Interpolant::new(scheme, &x, &y)?);
        }
        Ok(Self {
            as_of,
            scheme,
            smiles,
            interps,
        })
    }

    /// Flat surface at `vol` with a single tenor.
    pub fn flat(as_of: NaiveDate, vol: f64) -> Self {
        let anchors = vec![
            SmileAnchor { moneyness: 0.5, vol },
            SmileAnchor { moneyness: 1.5, vol },
        ];
        Self::new(as_of, Scheme::Linear, vec![TenorSmile { tenor: 1.0, anchors }])
            .expect("flat surface is valid")
    }

    /// Calibrates one smile per expiry from the snapshot.
    pub fn calibrate(
        snapshot: &MarketSnapshot,
        expiries: &[NaiveDate],
        scheme: Scheme,
        pooling: QuantilePooling,
    ) -> Result<Self> {
        let mut smiles = Vec::new();
        for &e in expiries {
            if e <= snapshot.as_of {
                continue;
            }
            smiles.push(TenorSmile {
                tenor: year_fraction(snapshot.as_of, e),
                anchors: build_smile(snapshot, e, pooling)?,
            });
        }
        smiles.dedup_by(|a, b| a.tenor == b.tenor);
        Self::new(snapshot.as_of, scheme, smiles)
    }

    /// Same anchors, different interpolation scheme.
    pub fn with_scheme(&self, scheme: Scheme) -> Result<Self> {
        Self::new(self.as_of, scheme, self.smiles.clone())
    }

    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn smiles(&self) -> &[TenorSmile] {
        &self.smiles
    }

    /// Vol within one calibrated tenor (index into `smiles`).
    pub fn smile_vol(&self, tenor_index: usize, moneyness: f64) -> f64 {
        self.interps[tenor_index].eval(moneyness)
    }

    /// Σ(M, τ): scheme interpolation in moneyness, linear total variance
    /// across tenors, flat extrapolation in both directions.
    pub fn vol_at(&self, moneyness: f64, tenor: f64) -> f64 {
        let n = self.smiles.len();
        if n == 1 || tenor <= self.smiles[0].tenor {
            return self.smile_vol(0, moneyness);
        }
        if tenor >= self.smiles[n - 1].tenor {
            return self.smile_vol(n - 1, moneyness);
        }
        let i = self.smiles.partition_point(|s| s.tenor <= tenor) - 1;
        let (t1, t2) = (self.smiles[i].tenor, self.smiles[i + 1].tenor);
        let (v1, v2) = (self.smile_vol(i, moneyness), self.smile_vol(i + 1, moneyness));
        let w = (tenor - t1) / (t2 - t1);
        let var = (1.0 - w) * v1 * v1 * t1 + w * v2 * v2 * t2;
        (var / tenor).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = SurfaceDump {
            as_of: self.as_of,
            scheme: self.scheme,
            tenors: self
                .smiles
                .iter()
                .map(|s| TenorDump {
                    tenor: s.tenor,
                    moneyness: s.anchors.iter().map(|a| a.moneyness).collect(),
                    vol: s.anchors.iter().map(|a| a.vol).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: SurfaceDump = serde_json::from_str(text)?;
        let smiles = dump
            .tenors
            .into_iter()
            .map(|t| {
                if t.moneyness.len() != t.vol.len() {
                    return Err(Error::InvalidInput("moneyness/vol length mismatch".into()));
                }
                Ok(TenorSmile {
                    tenor: t.tenor,
                    anchors: t
                        .moneyness
                        .into_iter()
                        .zip(t.vol)
                        .map(|(moneyness, vol)| SmileAnchor { moneyness, vol })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dump.as_of, dump.scheme, smiles)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardVolModel {
    ConstantVol,
    ConstantSmile,
    ConstantSurface,
    ForwardSmile,
}

impl ForwardVolModel {
    pub const ALL: [ForwardVolModel; 4] = [
        ForwardVolModel::ConstantVol,
        ForwardVolModel::ConstantSmile,
        ForwardVolModel::ConstantSurface,
        ForwardVolModel::ForwardSmile,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ForwardVolModel::ConstantVol => "constant_vol",
            ForwardVolModel::ConstantSmile => "constant_smile",
            ForwardVolModel::ConstantSurface => "constant_surface",
            ForwardVolModel::ForwardSmile => "forward_smile",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }
}

/// Dates of the hedging week: setup `t0`, short expiry `t1`, target expiry `t2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HedgeDates {
    pub t0: NaiveDate,
    pub t1: NaiveDate,
    pub t2: NaiveDate,
}

impl HedgeDates {
    pub fn tau10(&self) -> f64 {
        year_fraction(self.t0, self.t1)
    }
    pub fn tau20(&self) -> f64 {
        year_fraction(self.t0, self.t2)
    }
    pub fn tau21(&self) -> f64 {
        year_fraction(self.t1, self.t2)
    }
}

/// Vol used to price the target at `t1` when the index sits at `s_t1`.
pub fn forward_vol(
    surface: &VolSurface,
    model: ForwardVolModel,
    s_t1: f64,
    s_t0: f64,
    k_star: f64,
    dates: HedgeDates,
) -> Result<f64> {
    if !(dates.t0 <= dates.t1 && dates.t1 < dates.t2) {
        return Err(Error::InvalidInput(format!(
            "forward vol needs t0 <= t1 < t2, got {} {} {}",
            dates.t0, dates.t1, dates.t2
        )));
    }
    Ok(forward_vol_unchecked(surface, model, s_t1, s_t0, k_star, dates))
}

pub(crate) fn forward_vol_unchecked(
    surface: &VolSurface,
    model: ForwardVolModel,
    s_t1: f64,
    s_t0: f64,
    k_star: f64,
    dates: HedgeDates,
) -> f64 {
    let (t10, t20, t21) = (dates.tau10(), dates.tau20(), dates.tau21());
    match model {
        ForwardVolModel::ConstantVol => surface.vol_at(s_t0 / k_star, t20),
        ForwardVolModel::ConstantSmile => surface.vol_at(s_t1 / k_star, t20),
        ForwardVolModel::ConstantSurface => surface.vol_at(s_t1 / k_star, t21),
        ForwardVolModel::ForwardSmile => {
            let m = s_t1 / k_star;
            let v20 = surface.vol_at(m, t20);
            let v10 = if t10 > 0.0 { surface.vol_at(m, t10) } else { 0.0 };
            let fwd_var = v20 * v20 * t20 - v10 * v10 * t10;
            if fwd_var < -1e-12 {
                warn!(
                    "negative forward variance {fwd_var:e} at M={m:.4} on {}; flooring",
                    surface.as_of
                );
            }
            (fwd_var.max(FORWARD_VARIANCE_FLOOR) / t21).sqrt()
        }
    }
}
