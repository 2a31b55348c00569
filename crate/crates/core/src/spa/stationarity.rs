//! Augmented Dickey-Fuller and KPSS advisories at the 5% level.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// KPSS level-stationarity 5% critical value.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;

/// 5% ADF critical value (constant, no trend) for `n` effective
/// observations, from the response-surface fit τ∞ + β₁/n + β₂/n² + β₃/n³.
pub fn adf_critical_5pct(n: usize) -> f64 {
    let n = n as f64;
    -2.86154 - 2.8903 / n - 4.234 / (n * n) - 40.040 / (n * n * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub n: usize,
    /// Zero-variance (or too short) input; both verdicts are then `None`.
    pub degenerate: bool,
    pub adf_statistic: Option<f64>,
    pub adf_lags: usize,
    pub adf_rejects_unit_root: Option<bool>,
    pub kpss_statistic: Option<f64>,
    pub kpss_bandwidth: usize,
    pub kpss_rejects_stationarity: Option<bool>,
}

impl StationarityReport {
    /// Both tests point to stationarity.
    pub fn looks_stationary(&self) -> bool {
        self.adf_rejects_unit_root == Some(true) && self.kpss_rejects_stationarity == Some(false)
    }
}

/// Runs both tests. ADF uses a constant and ⌊12(n/100)^{1/4}⌋ lagged
/// differences; KPSS uses a Bartlett kernel with bandwidth ⌊4(n/100)^{2/9}⌋.
pub fn stationarity_checks(x: &[f64]) -> StationarityReport {
    let n = x.len();
    let adf_lags = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let kpss_bandwidth = (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize;
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let mut report = StationarityReport {
        n,
        degenerate: true,
        adf_statistic: None,
        adf_lags,
        adf_rejects_unit_root: None,
        kpss_statistic: None,
        kpss_bandwidth,
        kpss_rejects_stationarity: None,
    };
    if n < 10 || !(var > 0.0) {
        return report;
    }
    report.degenerate = false;
    if let Some((t, nobs)) = adf_statistic(x, adf_lags) {
        report.adf_statistic = Some(t);
        report.adf_rejects_unit_root = Some(t < adf_critical_5pct(nobs));
    }
    let k = kpss_statistic(x, kpss_bandwidth);
    report.kpss_statistic = Some(k);
    report.kpss_rejects_stationarity = Some(k > KPSS_CRITICAL_5PCT);
    report
}

/// t-statistic on y_{t−1} in Δy_t = α + γ·y_{t−1} + Σ β_i·Δy_{t−i} + e_t,
/// with the number of observations used.
pub fn adf_statistic(x: &[f64], lags: usize) -> Option<(f64, usize)> {
    let dy: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    if dy.len() <= lags + 3 {
        return None;
    }
    let rows = dy.len() - lags;
    let cols = 2 + lags;
    if rows <= cols {
        return None;
    }
    let mut a = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for r in 0..rows {
        let t = r + lags; // index into dy
        y[r] = dy[t];
        a[(r, 0)] = 1.0;
        a[(r, 1)] = x[t];
        for i in 1..=lags {
            a[(r, 1 + i)] = dy[t - i];
        }
    }
    let qr = a.clone().qr();
    let rmat = qr.r();
    if (0..cols).any(|i| rmat[(i, i)].abs() < 1e-12 * rmat[(0, 0)].abs().max(1.0)) {
        return None;
    }
    let qty = qr.q().transpose() * &y;
    let beta = rmat.solve_upper_triangular(&qty)?;
    let resid = &y - &a * &beta;
    let s2 = resid.norm_squared() / (rows - cols) as f64;
    // Var(β) = s²·(RᵀR)⁻¹; the needed diagonal entry is ‖row 1 of R⁻¹‖².
    let rinv = rmat.solve_upper_triangular(&DMatrix::identity(cols, cols))?;
    let var_gamma = s2 * rinv.row(1).norm_squared();
    if !(var_gamma > 0.0) {
        return None;
    }
    Some((beta[1] / var_gamma.sqrt(), rows))
}

/// KPSS level statistic Σ S_t² / (n²·σ̂²) with Bartlett long-run variance.
pub fn kpss_statistic(x: &[f64], bandwidth: usize) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let e: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut s = 0.0;
    let mut eta = 0.0;
    for v in &e {
        s += v;
        eta += s * s;
    }
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / nf;
    for lag in 1..=bandwidth.min(n - 1) {
        let g = (lag..n).map(|t| e[t] * e[t - lag]).sum::<f64>() / nf;
        lrv += 2.0 * (1.0 - lag as f64 / (bandwidth as f64 + 1.0)) * g;
    }
    eta / (nf * nf * lrv)
}
