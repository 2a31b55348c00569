//! Superior Predictive Ability test of a benchmark hedge model against a set
//! of alternatives, on daily loss series.
//!
//! Relative performance R_{m,t} = L_{0,t} − L_{m,t} is positive when
//! alternative m beats the benchmark. The statistic is
//! T = max(0, max_m √n·R̄_m/ω̂_m), with ω̂_m the stationary-bootstrap long-run
//! standard deviation. Its null distribution comes from stationary bootstrap
//! resamples recentred three ways (lower, consistent, upper), which gives
//! three p-values ordered p_lower ≤ p_consistent ≤ p_upper.

mod bootstrap;
mod scan;
mod stationarity;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{auto_block_length, optimal_block_length, StationaryBootstrap};
pub use scan::{best_model_scan, ScanReport, ScanUniverse};
pub use stationarity::{
    adf_critical_5pct, adf_statistic, kpss_statistic, stationarity_checks, StationarityReport,
    KPSS_CRITICAL_5PCT,
};

pub const DEFAULT_BOOTSTRAPS: usize = 1000;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Absolute,
    Squared,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Absolute, LossKind::Squared];

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Absolute => "absolute",
            LossKind::Squared => "squared",
        }
    }

    pub fn loss(self, hedge_error: f64) -> f64 {
        match self {
            LossKind::Absolute => hedge_error.abs(),
            LossKind::Squared => hedge_error * hedge_error,
        }
    }
}

/// Loss series per model; column 0 is the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub kind: LossKind,
}

impl LossMatrix {
    pub fn new(labels: Vec<String>, columns: Vec<Vec<f64>>, kind: LossKind) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::InvalidInput("one label per loss column required".into()));
        }
        let n = columns.first().map(Vec::len).unwrap_or(0);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("loss columns differ in length".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("loss matrix has non-finite entries".into()));
        }
        if n < 30 {
            warn!("loss matrix has only {n} observations");
        }
        Ok(Self { labels, columns, kind })
    }

    /// Losses of daily hedge errors (target PnL minus hedge PnL).
    pub fn from_hedge_errors(labels: Vec<String>, errors: &[Vec<f64>], kind: LossKind) -> Result<Self> {
        let columns = errors
            .iter()
            .map(|c| c.iter().map(|e| kind.loss(*e)).collect())
            .collect();
        Self::new(labels, columns, kind)
    }

    pub fn n_obs(&self) -> usize {
        self.columns.first().map(Vec::len).unwrap_or(0)
    }

    /// Same losses with column `benchmark` moved to the front.
    pub fn with_benchmark(&self, benchmark: usize) -> Self {
        let mut order: Vec<usize> = vec![benchmark];
        order.extend((0..self.columns.len()).filter(|i| *i != benchmark));
        Self {
            labels: order.iter().map(|i| self.labels[*i].clone()).collect(),
            columns: order.iter().map(|i| self.columns[*i].clone()).collect(),
            kind: self.kind,
        }
    }
}

/// R_{m,t} = L_{0,t} − L_{m,t} for every alternative m ≥ 1.
pub fn relative_performance(losses: &LossMatrix) -> Result<Vec<Vec<f64>>> {
    if losses.columns.len() < 2 {
        return Err(Error::InvalidInput("need a benchmark and at least one alternative".into()));
    }
    let bench = &losses.columns[0];
    Ok(losses.columns[1..]
        .iter()
        .map(|c| bench.iter().zip(c).map(|(b, a)| b - a).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaOptions {
    pub n_boot: usize,
    pub seed: u64,
    /// Geometric block parameter; chosen automatically when `None`.
    pub p_geo: Option<f64>,
}

impl Default for SpaOptions {
    fn default() -> Self {
        Self {
            n_boot: DEFAULT_BOOTSTRAPS,
            seed: 0,
            p_geo: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaResult {
    pub p_lower: f64,
    pub p_consistent: f64,
    pub p_upper: f64,
    pub statistic: f64,
    pub block_p: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub n_obs: usize,
    /// Alternatives dropped for zero variance (indices into the input columns).
    pub excluded: Vec<usize>,
    pub stationarity: Vec<StationarityReport>,
    pub warnings: Vec<String>,
}

impl SpaResult {
    /// The benchmark is rejected (some alternative is significantly better)
    /// by the consistent p-value.
    pub fn rejects(&self) -> bool {
        self.p_consistent < SIGNIFICANCE
    }
}

/// Long-run variance of √n·R̄ under the stationary bootstrap with parameter q:
/// γ₀ + 2 Σ_{i≥1} κ(n, i)·γ_i with κ = (1 − i/n)(1 − q)^i + (i/n)(1 − q)^{n−i}.
pub fn bootstrap_variance(x: &[f64], q: f64) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut var = d.iter().map(|v| v * v).sum::<f64>() / nf;
    for i in 1..n {
        let fi = i as f64;
        let k = (1.0 - fi / nf) * (1.0 - q).powi(i as i32) + (fi / nf) * (1.0 - q).powi((n - i) as i32);
        if k < 1e-16 {
            continue;
        }
        let g = (i..n).map(|t| d[t] * d[t - i]).sum::<f64>() / nf;
        var += 2.0 * k * g;
    }
    var
}

/// Runs the test on relative-performance columns (one per alternative).
pub fn spa_test(r: &[Vec<f64>], opts: &SpaOptions) -> Result<SpaResult> {
    if r.is_empty() {
        return Err(Error::InvalidInput("SPA test needs at least one alternative".into()));
    }
    let n = r[0].len();
    if r.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("relative performance columns differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput("SPA test needs at least two observations".into()));
    }
    if opts.n_boot == 0 {
        return Err(Error::InvalidInput("n_boot must be positive".into()));
    }
    let mut warnings = Vec::new();
    let stationarity: Vec<StationarityReport> = r.iter().map(|c| stationarity_checks(c)).collect();
    for (i, s) in stationarity.iter().enumerate() {
        if !s.degenerate && !s.looks_stationary() {
            warnings.push(format!("relative performance of alternative {i} may be non-stationary"));
        }
    }

    let nf = n as f64;
    let means: Vec<f64> = r.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let mut active = Vec::new();
    let mut excluded = Vec::new();
    for (i, c) in r.iter().enumerate() {
        let m = means[i];
        let spread = c.iter().map(|v| (v - m).abs()).fold(0.0, f64::max);
        let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if spread > 1e-13 * scale {
            active.push(i);
        } else {
            excluded.push(i);
        }
    }
    for i in &excluded {
        let msg = format!("alternative {i} has zero-variance relative performance; excluded");
        warn!("{msg}");
        warnings.push(msg);
    }
    let p_geo = match opts.p_geo {
        Some(p) => p,
        None => {
            let cols: Vec<Vec<f64>> = active.iter().map(|i| r[*i].clone()).collect();
            if cols.is_empty() {
                1.0
            } else {
                auto_block_length(&cols)
            }
        }
    };
    let sb = StationaryBootstrap::new(n, p_geo, opts.seed)?;
    if active.is_empty() {
        return Ok(SpaResult {
            p_lower: 1.0,
            p_consistent: 1.0,
            p_upper: 1.0,
            statistic: 0.0,
            block_p: p_geo,
            n_boot: opts.n_boot,
            seed: opts.seed,
            n_obs: n,
            excluded,
            stationarity,
            warnings,
        });
    }

    let omega: Vec<f64> = active
        .iter()
        .map(|&i| bootstrap_variance(&r[i], p_geo).max(0.0).sqrt())
        .collect();
    let sqrt_n = nf.sqrt();
    let statistic = active
        .iter()
        .zip(&omega)
        .map(|(&i, w)| sqrt_n * means[i] / w)
        .fold(0.0, f64::max);

    let threshold = (2.0 * nf.ln().ln()).max(0.0).sqrt();
    // Recentring g(R̄) for the lower, consistent and upper variants.
    let centres: Vec<[f64; 3]> = active
        .iter()
        .zip(&omega)
        .map(|(&i, w)| {
            let m = means[i];
            let consistent = if m >= -w / sqrt_n * threshold { m } else { 0.0 };
            [m.max(0.0), consistent, m]
        })
        .collect();

    let exceed: Vec<[bool; 3]> = (0..opts.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let idx = sb.indices(b);
            let mut t = [0.0f64; 3];
            for (k, &i) in active.iter().enumerate() {
                let c = &r[i];
                let mean_b = idx.iter().map(|&j| c[j]).sum::<f64>() / nf;
                for v in 0..3 {
                    t[v] = t[v].max(sqrt_n * (mean_b - centres[k][v]) / omega[k]);
                }
            }
            [t[0] >= statistic, t[1] >= statistic, t[2] >= statistic]
        })
        .collect();
    let p = |v: usize| exceed.iter().filter(|e| e[v]).count() as f64 / opts.n_boot as f64;
    Ok(SpaResult {
        p_lower: p(0),
        p_consistent: p(1),
        p_upper: p(2),
        statistic,
        block_p: p_geo,
        n_boot: opts.n_boot,
        seed: opts.seed,
        n_obs: n,
        excluded,
        stationarity,
        warnings,
    })
}

/// SPA test of the benchmark (column 0) against the other loss columns.
pub fn spa_test_losses(losses: &LossMatrix, opts: &SpaOptions) -> Result<SpaResult> {
    spa_test(&relative_performance(losses)?, opts)
}
