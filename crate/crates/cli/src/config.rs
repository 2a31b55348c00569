use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use semistatic::backtest::{BacktestSettings, ModelSpec, Universe, Window, DEFAULT_BENCHMARK};
use semistatic::hedge::DEFAULT_COST_RATE;
use semistatic::market_data::QuantilePooling;
use semistatic::spa::DEFAULT_BOOTSTRAPS;
use semistatic::synthetic::WorldSpec;
use semistatic::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum WindowPreset {
    Full,
    Covid,
    Custom(Window),
}

impl WindowPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "covid" => Ok(Self::Covid),
            other => {
                let bad = || Error::InvalidInput(format!("window '{s}': expected full, covid or START..END"));
                let (a, b) = other.split_once("..").ok_or_else(bad)?;
                let start = NaiveDate::parse_from_str(a.trim(), "%Y-%m-%d").map_err(|_| bad())?;
                let end = NaiveDate::parse_from_str(b.trim(), "%Y-%m-%d").map_err(|_| bad())?;
                if end < start {
                    return Err(bad());
                }
                Ok(Self::Custom(Window { start, end }))
            }
        }
    }

    /// Concrete dates; `Full` spans the given data range.
    pub fn resolve(&self, first: NaiveDate, last: NaiveDate) -> Window {
        match self {
            Self::Full => Window { start: first, end: last },
            Self::Covid => Window::covid(),
            Self::Custom(w) => *w,
        }
    }
}

/// Declarative run configuration as written in the TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_root: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub seed: Option<u64>,
    pub window: Option<String>,
    pub universes: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub benchmark: Option<String>,
    pub n_paths: Option<usize>,
    pub n_boot: Option<usize>,
    pub cost_bps: Option<f64>,
    pub pooling: Option<QuantilePooling>,
    pub carr_wu_nodes: Option<usize>,
    pub synth: Option<WorldSpec>,
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_root: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub seed: Option<u64>,
    pub window: Option<String>,
    pub universes: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub cost_bps: Option<f64>,
    pub n_paths: Option<usize>,
    pub n_boot: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub output_root: PathBuf,
    pub seed: u64,
    pub window: WindowPreset,
    pub universes: Vec<Universe>,
    pub models: Vec<ModelSpec>,
    pub benchmark: ModelSpec,
    pub n_paths: usize,
    pub n_boot: usize,
    pub cost_rate: f64,
    pub pooling: QuantilePooling,
    pub carr_wu_nodes: usize,
    pub synth: Option<WorldSpec>,
}

/// Model list entries: ids, or `all` for the full grid.
pub fn parse_models(items: &[String]) -> Result<Vec<ModelSpec>> {
    let mut out = Vec::new();
    for item in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("all") {
            out.extend(ModelSpec::full_grid());
        } else {
            out.push(item.parse()?);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|m| seen.insert(*m));
    Ok(out)
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| Error::InvalidInput(format!("config {}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        Self::resolve(file, overrides)
    }

    pub fn resolve(file: FileConfig, o: Overrides) -> Result<Self> {
        let universes: Vec<String> = o
            .universes
            .or(file.universes)
            .unwrap_or_else(|| vec!["NIFTY:call:ATM".to_string()]);
        let universes = universes
            .iter()
            .flat_map(|s| s.split(','))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Universe::parse)
            .collect::<Result<Vec<_>>>()?;
        let models = parse_models(&o.models.or(file.models).unwrap_or_else(|| vec!["all".to_string()]))?;
        let benchmark: ModelSpec = file.benchmark.as_deref().unwrap_or(DEFAULT_BENCHMARK).parse()?;
        let cost_bps = o.cost_bps.or(file.cost_bps).unwrap_or(DEFAULT_COST_RATE * 1e4);
        let cfg = Self {
            data_root: o.data_root.or(file.data_root).unwrap_or_else(|| PathBuf::from("data")),
            output_root: o.output_root.or(file.output_root).unwrap_or_else(|| PathBuf::from("output")),
            seed: o.seed.or(file.seed).unwrap_or(0),
            window: WindowPreset::parse(o.window.or(file.window).as_deref().unwrap_or("full"))?,
            universes,
            models,
            benchmark,
            n_paths: o.n_paths.or(file.n_paths).unwrap_or(semistatic::simulation::DEFAULT_PATHS),
            n_boot: o.n_boot.or(file.n_boot).unwrap_or(DEFAULT_BOOTSTRAPS),
            cost_rate: cost_bps * 1e-4,
            pooling: file.pooling.unwrap_or_default(),
            carr_wu_nodes: file.carr_wu_nodes.unwrap_or(10),
            synth: file.synth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.universes.is_empty() {
            return Err(Error::InvalidInput("no universes configured".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidInput("model grid is empty".into()));
        }
        if self.n_paths < 2 || self.n_boot == 0 || self.carr_wu_nodes == 0 {
            return Err(Error::InvalidInput("n_paths, n_boot and carr_wu_nodes must be positive".into()));
        }
        if !(self.cost_rate.is_finite() && self.cost_rate >= 0.0) {
            return Err(Error::InvalidInput("cost must be a non-negative number of bps".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> BacktestSettings {
        BacktestSettings {
            n_paths: self.n_paths,
            seed: self.seed,
            cost_rate: self.cost_rate,
            pooling: self.pooling,
            carr_wu_nodes: self.carr_wu_nodes,
            ..BacktestSettings::default()
        }
    }

    /// Market files for `index`: `<data_root>/<index>` when it exists,
    /// otherwise the data root itself.
    pub fn index_root(&self, index: &str) -> PathBuf {
        let sub = self.data_root.join(index);
        if sub.is_dir() {
            sub
        } else {
            self.data_root.clone()
        }
    }
}
