//! Flat-file market data store.
//!
//! Files under a data root:
//! - `options.csv`: `trade_date,expiry,kind,strike,close,volume,open_interest`
//! - `futures.csv`: `trade_date,expiry,close`
//! - `spot.csv`: `trade_date,close`
//! - `rates.csv`: `date,rate_decimal`
//! - `holidays.txt`: one ISO date per line (optional)

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{Calendar, MarketSnapshot, OptionKind, OptionQuote};
use crate::error::{Error, Result};

pub const OPTIONS_FILE: &str = "options.csv";
pub const FUTURES_FILE: &str = "futures.csv";
pub const SPOT_FILE: &str = "spot.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const HOLIDAYS_FILE: &str = "holidays.txt";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketData {
    /// Option quotes keyed by trade date, each day sorted by (expiry, kind, strike).
    pub options: BTreeMap<NaiveDate, Vec<OptionQuote>>,
    /// Futures closes keyed by trade date, then expiry.
    pub futures: BTreeMap<NaiveDate, BTreeMap<NaiveDate, f64>>,
    pub spot: BTreeMap<NaiveDate, f64>,
    pub rates: BTreeMap<NaiveDate, f64>,
    pub calendar: Calendar,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date '{s}': {e}"))
}

fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("bad {what} '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("{what} is not finite"));
    }
    Ok(v)
}

fn parse_u64(s: &str, what: &str) -> std::result::Result<u64, String> {
    let t = s.trim();
    t.parse::<u64>()
        .or_else(|_| match t.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
            _ => Err(()),
        })
        .map_err(|_| format!("bad {what} '{s}' (expected a non-negative count)"))
}

/// Reads a CSV with the exact `header`, calling `row` for every record with
/// its 1-based line number (the header is line 1).
fn read_csv(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(&csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    let got = rdr.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            row: 1,
            message: format!("expected header '{}', found '{}'", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        });
    }
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, line, e))?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                file: path.to_path_buf(),
                row: line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        row(&rec).map_err(|message| Error::Parse {
            file: path.to_path_buf(),
            row: line,
            message,
        })?;
    }
    Ok(())
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!()
    }
    Error::Parse {
        file: path.to_path_buf(),
        row,
        message: e.to_string(),
    }
}

impl MarketData {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "data root not found"),
            ));
        }
        let mut md = MarketData::default();

        read_csv(
            &root.join(OPTIONS_FILE),
            &["trade_date", "expiry", "kind", "strike", "close", "volume", "open_interest"],
            |r| {
                let kind = OptionKind::from_code(&r[2]).ok_or_else(|| format!("bad kind '{}'", &r[2]))?;
                let q = OptionQuote {
                    trade_date: parse_date(&r[0])?,
                    expiry: parse_date(&r[1])?,
                    kind,
                    strike: parse_f64(&r[3], "strike")?,
                    close: parse_f64(&r[4], "close")?,
                    volume: parse_u64(&r[5], "volume")?,
                    open_interest: parse_u64(&r[6], "open_interest")?,
                };
                q.validate()?;
                md.options.entry(q.trade_date).or_default().push(q);
                Ok(())
            },
        )?;
        for day in md.options.values_mut() {
            day.sort_by(|a, b| {
                a.expiry
                    .cmp(&b.expiry)
                    .then(a.kind.cmp(&b.kind))
                    .then(a.strike.total_cmp(&b.strike))
            });
        }

        read_csv(&root.join(FUTURES_FILE), &["trade_date", "expiry", "close"], |r| {
            let close = parse_f64(&r[2], "close")?;
            if close <= 0.0 {
                return Err("futures close must be positive".into());
            }
            md.futures
                .entry(parse_date(&r[0])?)
                .or_default()
                .insert(parse_date(&r[1])?, close);
            Ok(())
        })?;

        read_csv(&root.join(SPOT_FILE), &["trade_date", "close"], |r| {
            let close = parse_f64(&r[1], "close")?;
            if close <= 0.0 {
                return Err("spot close must be positive".into());
            }
            md.spot.insert(parse_date(&r[0])?, close);
            Ok(())
        })?;

        read_csv(&root.join(RATES_FILE), &["date", "rate_decimal"], |r| {
            md.rates.insert(parse_date(&r[0])?, parse_f64(&r[1], "rate")?);
            Ok(())
        })?;

        let hol_path = root.join(HOLIDAYS_FILE);
        if hol_path.exists() {
            let text = fs::read_to_string(&hol_path).map_err(|e| Error::io(&hol_path, e))?;
            let mut hols = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                hols.push(parse_date(line).map_err(|message| Error::Parse {
                    file: hol_path.clone(),
                    row: i + 1,
                    message,
                })?);
            }
            md.calendar = Calendar::new(hols);
        }
        Ok(md)
    }

    /// Writes the store in the layout read by [`MarketData::load`].
    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = |f: &str| -> PathBuf { root.join(f) };

        let mut opt = String::from("trade_date,expiry,kind,strike,close,volume,open_interest\n");
        for q in self.options.values().flatten() {
            opt.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                q.trade_date,
                q.expiry,
                q.kind.code(),
                q.strike,
                q.close,
                q.volume,
                q.open_interest
            ));
        }
        write_file(&path(OPTIONS_FILE), &opt)?;

        let mut fut = String::from("trade_date,expiry,close\n");
        for (d, m) in &self.futures {
            for (e, c) in m {
                fut.push_str(&format!("{d},{e},{c}\n"));
            }
        }
        write_file(&path(FUTURES_FILE), &fut)?;

        let mut spot = String::from("trade_date,close\n");
        for (d, c) in &self.spot {
            spot.push_str(&format!("{d},{c}\n"));
        }
        write_file(&path(SPOT_FILE), &spot)?;

        let mut rates = String::from("date,rate_decimal\n");
        for (d, r) in &self.rates {
            rates.push_str(&format!("{d},{r}\n"));
        }
        write_file(&path(RATES_FILE), &rates)?;

        let hol: String = self.calendar.holidays().map(|d| format!("{d}\n")).collect();
        write_file(&path(HOLIDAYS_FILE), &hol)
    }

    /// Trading dates: days with a spot close.
    pub fn trading_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.spot.keys().copied()
    }

    pub fn spot_on(&self, date: NaiveDate) -> Result<f64> {
        self.spot
            .get(&date)
            .copied()
            .ok_or_else(|| Error::MissingData(format!("spot close on {date}")))
    }

    /// Most recent rate on or before `date`.
    pub fn rate_on(&self, date: NaiveDate) -> Result<f64> {
        self.rates
            .range(..=date)
            .next_back()
            .map(|(_, r)| *r)
            .ok_or_else(|| Error::MissingData(format!("risk-free rate on or before {date}")))
    }

    pub fn option_close(
        &self,
        date: NaiveDate,
        expiry: NaiveDate,
        strike: f64,
        kind: OptionKind,
    ) -> Option<f64> {
        self.options.get(&date).and_then(|day| {
            day.iter()
                .find(|q| q.expiry == expiry && q.kind == kind && q.strike == strike)
                .map(|q| q.close)
        })
    }

    /// Snapshot of `as_of` with the given weekly and monthly expiries.
    pub fn snapshot(
        &self,
        as_of: NaiveDate,
        weekly_expiry: NaiveDate,
        monthly_expiry: NaiveDate,
    ) -> Result<MarketSnapshot> {
        let snap = MarketSnapshot {
            as_of,
            spot: self.spot_on(as_of)?,
            futures: self.futures.get(&as_of).cloned().unwrap_or_default(),
            rate: self.rate_on(as_of)?,
            quotes: self
                .options
                .get(&as_of)
                .cloned()
                .ok_or_else(|| Error::MissingData(format!("option chain on {as_of}")))?,
            weekly_expiry,
            monthly_expiry,
        };
        snap.validate()?;
        Ok(snap)
    }

    /// Restricts every series to trade dates in `[start, end]`.
    pub fn restrict(&self, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            options: self.options.range(start..=end).map(|(k, v)| (*k, v.clone())).collect(),
            futures: self.futures.range(start..=end).map(|(k, v)| (*k, v.clone())).collect(),
            spot: self.spot.range(start..=end).map(|(k, v)| (*k, *v)).collect(),
            rates: self.rates.clone(),
            calendar: self.calendar.clone(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
