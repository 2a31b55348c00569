use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use semistatic::attribution::{attribute_book, AttributionReport, PnlBreakdown};
use semistatic::backtest::{self, BacktestSpec, Universe, Window};
use semistatic::market_data::MarketData;
use semistatic::rng::derive_seed;
use semistatic::spa::{best_model_scan, spa_test_losses, LossKind, LossMatrix, ScanUniverse, SpaOptions, SpaResult};
use semistatic::synthetic::{generate, WorldSpec};
use semistatic::vol_surface::{Scheme, VolSurface};
use semistatic::{Error, Result};

use crate::config::RunConfig;

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

/// Market data per index, loaded once.
struct DataCache<'a> {
    cfg: &'a RunConfig,
    loaded: BTreeMap<String, MarketData>,
}

impl<'a> DataCache<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            loaded: BTreeMap::new(),
        }
    }

    fn get(&mut self, index: &str) -> Result<&MarketData> {
        if !self.loaded.contains_key(index) {
            let root = self.cfg.index_root(index);
            info!("loading market data for {index} from {}", root.display());
            self.loaded.insert(index.to_string(), MarketData::load(&root)?);
        }
        Ok(&self.loaded[index])
    }
}

fn window_for(cfg: &RunConfig, data: &MarketData) -> Result<Window> {
    let first = data.spot.keys().next().copied();
    let last = data.spot.keys().next_back().copied();
    match (first, last) {
        (Some(a), Some(b)) => Ok(cfg.window.resolve(a, b)),
        _ => Err(Error::MissingData("spot series is empty".into())),
    }
}

fn universe_dir(cfg: &RunConfig, stage: &str, u: &Universe) -> PathBuf {
    cfg.output_root.join(stage).join(u.slug())
}

fn indices(cfg: &RunConfig) -> Vec<String> {
    let mut v: Vec<String> = cfg.universes.iter().map(|u| u.index.clone()).collect();
    v.sort();
    v.dedup();
    v
}

/// Writes a synthetic market into the data root.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.synth.clone().unwrap_or_else(|| WorldSpec {
        seed: cfg.seed,
        ..WorldSpec::default()
    });
    for index in indices(cfg) {
        let root = cfg.data_root.join(&index);
        generate(&spec, &root)?;
        info!("wrote synthetic market for {index} to {}", root.display());
    }
    Ok(())
}

const SMILE_GRID_STEPS: usize = 80;

fn smile_csv(surface: &VolSurface) -> Result<String> {
    let mut out = String::from("expiry,tenor,series,moneyness,vol\n");
    let variants: Vec<(Scheme, VolSurface)> = Scheme::ALL
        .iter()
        .map(|s| Ok((*s, surface.with_scheme(*s)?)))
        .collect::<Result<_>>()?;
    for (i, smile) in surface.smiles().iter().enumerate() {
        let expiry = surface.as_of() + chrono::Duration::days((smile.tenor * 365.0).round() as i64);
        for a in &smile.anchors {
            out.push_str(&format!("{expiry},{},anchor,{},{}\n", smile.tenor, a.moneyness, a.vol));
        }
        for (scheme, s) in &variants {
            for k in 0..=SMILE_GRID_STEPS {
                let m = 0.6 + 0.8 * k as f64 / SMILE_GRID_STEPS as f64;
                out.push_str(&format!("{expiry},{},{},{m},{}\n", smile.tenor, scheme.label(), s.smile_vol(i, m)));
            }
        }
    }
    Ok(out)
}

/// Daily surfaces over the window: one JSON per date and smile-plot CSVs.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let mut cache = DataCache::new(cfg);
    for index in indices(cfg) {
        let data = cache.get(&index)?;
        let w = window_for(cfg, data)?;
        let surfaces = backtest::calibrate_surfaces(data, w.start, w.end, cfg.pooling);
        if surfaces.is_empty() {
            return Err(Error::MissingData(format!(
                "no surface could be calibrated for {index} in {}..{}",
                w.start, w.end
            )));
        }
        let dir = cfg.output_root.join("calibrate").join(&index);
        for (date, s) in &surfaces {
            write(&dir.join("surfaces").join(format!("{date}.json")), &(s.to_json()? + "\n"))?;
            write(&dir.join("smiles").join(format!("{date}.csv")), &smile_csv(s)?)?;
        }
        let missing: Vec<NaiveDate> = data
            .spot
            .range(w.start..=w.end)
            .map(|(d, _)| *d)
            .filter(|d| !surfaces.contains_key(d))
            .collect();
        write_json(
            &dir.join("calibration.json"),
            &json!({ "index": index, "window": w, "dates": surfaces.len(), "failed_dates": missing }),
        )?;
    }
    Ok(())
}

fn spec_for(cfg: &RunConfig, u: &Universe, window: Window) -> BacktestSpec {
    BacktestSpec {
        universe: u.clone(),
        window,
        models: cfg.models.clone(),
        settings: cfg.settings(),
    }
}

/// Backtest of every universe: PnL CSV, summary JSON and weekly hedges.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<()> {
    let mut cache = DataCache::new(cfg);
    for u in &cfg.universes {
        let data = cache.get(&u.index)?;
        let window = window_for(cfg, data)?;
        let spec = spec_for(cfg, u, window);
        info!("backtesting {} over {}..{}", u.label(), window.start, window.end);
        let (book, result) = backtest::run(&spec, data)?;
        let dir = universe_dir(cfg, "backtest", u);
        write(&dir.join("pnl.csv"), &result.to_csv())?;
        write_json(
            &dir.join("summary.json"),
            &json!({
                "universe": u.label(),
                "window": window,
                "seed": cfg.seed,
                "n_paths": cfg.n_paths,
                "cost_rate": cfg.cost_rate,
                "summary": result.summary(),
            }),
        )?;
        write_json(&dir.join("hedges.json"), &book)?;
    }
    Ok(())
}

/// Hedge errors per model from a backtest PnL file, in date order.
pub fn read_hedge_errors(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::MissingData(format!("{}: {e}", path.display())))?;
    let mut by_model: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            row: i + 2,
            message: e.to_string(),
        })?;
        let parse_err = |m: String| Error::Parse {
            file: path.to_path_buf(),
            row: i + 2,
            message: m,
        };
        let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or(""), "%Y-%m-%d")
            .map_err(|e| parse_err(format!("date: {e}")))?;
        let model = rec.get(2).ok_or_else(|| parse_err("missing model_id".into()))?.to_string();
        let err: f64 = rec
            .get(4)
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(format!("hedge_error: {e}")))?;
        by_model.entry(model).or_default().push((date, err));
    }
    Ok(by_model
        .into_iter()
        .map(|(m, mut v)| {
            v.sort_by_key(|(d, _)| *d);
            (m, v.into_iter().map(|(_, e)| e).collect())
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct SpaRecord {
    universe: String,
    loss: LossKind,
    benchmark: String,
    alternatives: Vec<String>,
    result: SpaResult,
}

/// SPA test of the benchmark in every universe and loss function, plus the
/// every-model-as-benchmark scan.
pub fn cmd_spa(cfg: &RunConfig) -> Result<()> {
    let bench = cfg.benchmark.id();
    let mut table = String::from(
        "index,kind,moneyness,benchmark,absolute_lower,absolute_consistent,absolute_upper,squared_lower,squared_consistent,squared_upper\n",
    );
    let mut records = Vec::new();
    let mut scan_universes = Vec::new();
    for (ui, u) in cfg.universes.iter().enumerate() {
        let path = universe_dir(cfg, "backtest", u).join("pnl.csv");
        if !path.is_file() {
            return Err(Error::MissingData(format!(
                "{} not found; run the backtest command first",
                path.display()
            )));
        }
        let errors = read_hedge_errors(&path)?;
        let mut labels: Vec<String> = cfg
            .models
            .iter()
            .map(|m| m.id())
            .filter(|id| errors.contains_key(id))
            .collect();
        let Some(pos) = labels.iter().position(|l| *l == bench) else {
            return Err(Error::InvalidInput(format!(
                "benchmark {bench} missing from backtest results of {}",
                u.label()
            )));
        };
        labels.swap(0, pos);
        labels[1..].sort();
        let columns: Vec<Vec<f64>> = labels.iter().map(|l| errors[l].clone()).collect();
        let mut row = format!("{},{},{},{bench}", u.index, u.kind.label(), u.moneyness.label());
        for (li, kind) in LossKind::ALL.into_iter().enumerate() {
            let losses = LossMatrix::from_hedge_errors(labels.clone(), &columns, kind)?;
            let opts = SpaOptions {
                n_boot: cfg.n_boot,
                seed: derive_seed(cfg.seed, (ui * LossKind::ALL.len() + li) as u64),
                p_geo: None,
            };
            if labels.len() > 1 {
                let res = spa_test_losses(&losses, &opts)?;
                for w in &res.warnings {
                    warn!("{} {}: {w}", u.label(), kind.label());
                }
                row.push_str(&format!(",{},{},{}", res.p_lower, res.p_consistent, res.p_upper));
                records.push(SpaRecord {
                    universe: u.label(),
                    loss: kind,
                    benchmark: bench.clone(),
                    alternatives: labels[1..].to_vec(),
                    result: res,
                });
            } else {
                row.push_str(",,,");
            }
            scan_universes.push(ScanUniverse {
                label: format!("{}:{}", u.label(), kind.label()),
                losses,
            });
        }
        table.push_str(&row);
        table.push('\n');
    }
    let dir = cfg.output_root.join("spa");
    write(&dir.join("spa.csv"), &table)?;
    write_json(&dir.join("spa.json"), &records)?;
    if scan_universes.iter().all(|s| s.losses.labels.len() > 1) {
        let scan = best_model_scan(
            &scan_universes,
            &SpaOptions {
                n_boot: cfg.n_boot,
                seed: derive_seed(cfg.seed, u64::MAX),
                p_geo: None,
            },
        )?;
        write_json(&dir.join("scan.json"), &json!({
            "universally_superior": scan.universally_superior,
            "rejected_in": scan.rejected_in,
            "p_consistent": scan.results.iter().map(|(m, per)| {
                (m.clone(), per.iter().map(|(u, r)| (u.clone(), r.p_consistent)).collect::<BTreeMap<_, _>>())
            }).collect::<BTreeMap<_, _>>(),
        }))?;
    }
    Ok(())
}

fn factor_table(report: &AttributionReport, header: &str, cols: impl Fn(&PnlBreakdown) -> Vec<f64>) -> String {
    let mut out = format!("date,series,{header}\n");
    let mut push = |name: &str, b: &PnlBreakdown| {
        let vals: Vec<String> = cols(b).iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{name},{}\n", b.date, vals.join(",")));
    };
    for (i, t) in report.target.iter().enumerate() {
        push("target", t);
        for (id, s) in &report.models {
            if let Some(b) = s.get(i) {
                push(id, b);
            }
        }
    }
    out
}

/// Daily full, marginal and greek PnL per series and component regressions.
pub fn cmd_attribution(cfg: &RunConfig) -> Result<()> {
    let mut cache = DataCache::new(cfg);
    for u in &cfg.universes {
        let data = cache.get(&u.index)?;
        let window = window_for(cfg, data)?;
        let spec = spec_for(cfg, u, window);
        let data = data.restrict(window.start, window.end);
        let surfaces = backtest::calibrate_surfaces(&data, window.start, window.end, cfg.pooling);
        let book = backtest::build_hedges(&spec, &data, &surfaces)?;
        let report = attribute_book(&book, &data, &surfaces)?;
        let dir = universe_dir(cfg, "attribution", u);
        write(&dir.join("attribution.csv"), &report.to_csv())?;
        write(
            &dir.join("spot.csv"),
            &factor_table(&report, "full,marginal_spot,delta,gamma,delta_gamma", |b| {
                vec![b.full, b.marginal_spot, b.delta_pnl, b.gamma_pnl, b.delta_pnl + b.gamma_pnl]
            }),
        )?;
        write(
            &dir.join("vol.csv"),
            &factor_table(&report, "marginal_vol,vega,volga,vega_volga", |b| {
                vec![b.marginal_vol, b.vega_pnl, b.volga_pnl, b.vega_pnl + b.volga_pnl]
            }),
        )?;
        write(
            &dir.join("time.csv"),
            &factor_table(&report, "marginal_time,theta", |b| vec![b.marginal_time, b.theta_pnl]),
        )?;
        write_json(&dir.join("regressions.json"), &report.regressions)?;
    }
    Ok(())
}

/// Cross-universe table of hedge-error RMSE and PnL fits from backtest summaries.
pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let mut csv = String::from("universe,model,rmse,mean_abs_error,beta,r_squared,n\n");
    let mut all = BTreeMap::new();
    for u in &cfg.universes {
        let path = universe_dir(cfg, "backtest", u).join("summary.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let summary: backtest::BacktestSummary = serde_json::from_value(v["summary"].clone())?;
        for (model, s) in &summary.models {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            csv.push_str(&format!(
                "{},{model},{},{},{},{},{}\n",
                u.label(),
                s.rmse,
                s.mean_abs_error,
                opt(s.beta),
                opt(s.r_squared),
                s.n
            ));
        }
        all.insert(u.label(), summary);
    }
    let dir = cfg.output_root.join("report");
    write(&dir.join("summary.csv"), &csv)?;
    write_json(&dir.join("summary.json"), &all)
}
