//! L1-penalized least squares by cyclic coordinate descent, with a
//! log-spaced penalty path and a plateau rule for choosing the penalty.
//!
//! The solver minimizes `(1/N)‖Xw - Y‖² + λ‖w‖₁`. With standardization on,
//! each column is divided by its root mean square before solving, so the
//! penalty applies to the scaled coefficients; reported weights are always in
//! the original units.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// Column-major regressors; with `has_intercept`, column 0 is all ones.
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    has_intercept: bool,
}

impl DesignMatrix {
    /// General design without an intercept column.
    pub fn new(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        Self::build(columns, y, false)
    }

    /// Prepends a column of ones (the cash position) to `features`.
    pub fn with_intercept(features: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let mut columns = Vec::with_capacity(features.len() + 1);
        columns.push(vec![1.0; y.len()]);
        columns.extend(features);
        Self::build(columns, y, true)
    }

    fn build(columns: Vec<Vec<f64>>, y: Vec<f64>, has_intercept: bool) -> Result<Self> {
        let n = y.len();
        if n == 0 || columns.is_empty() {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("design columns must match target length".into()));
        }
        if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design matrix contains non-finite values".into()));
        }
        if n < columns.len() {
            warn!("design has {} rows for {} columns", n, columns.len());
        }
        Ok(Self {
            columns,
            y,
            has_intercept,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn target(&self) -> &[f64] {
        &self.y
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// Same regressors, new target.
    pub fn with_target(&self, y: Vec<f64>) -> Result<Self> {
        Self::build(self.columns.clone(), y, self.has_intercept)
    }

    /// Xw for raw-unit weights.
    pub fn predict(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        for (col, &w) in self.columns.iter().zip(weights) {
            if w != 0.0 {
                for (o, x) in out.iter_mut().zip(col) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// (1/N)‖Xw - Y‖² from explicit residuals.
    pub fn mse(&self, weights: &[f64]) -> f64 {
        let pred = self.predict(weights);
        pred.iter()
            .zip(&self.y)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / self.n_rows() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub standardize: bool,
    /// Only meaningful when the design carries an intercept column.
    pub penalize_intercept: bool,
    pub max_sweeps: usize,
    /// Relative coefficient-change tolerance.
    pub tolerance: f64,
    /// Largest KKT violation accepted at convergence, in objective-gradient units.
    pub kkt_tolerance: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            penalize_intercept: true,
            max_sweeps: 10_000,
            tolerance: 1e-9,
            kkt_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    /// Raw-unit weights; with an intercept design, index 0 is the cash notional.
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub in_sample_mse: f64,
    pub n_nonzero: usize,
    pub sweeps: usize,
    /// Largest KKT violation in the solved (scaled) coordinates.
    pub kkt_residual: f64,
    /// Objective after each full or active-set sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Precomputed Gram form of a design in the solved coordinates.
struct Problem {
    n_cols: usize,
    scale: Vec<f64>,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    penalized: Vec<bool>,
}

impl Problem {
    fn new(design: &DesignMatrix, opts: &LassoOptions) -> Self {
        let n = design.n_rows() as f64;
        let p = design.n_cols();
        let scale: Vec<f64> = design
            .columns
            .iter()
            .map(|c| {
                if opts.standardize {
                    (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scaled: Vec<Vec<f64>> = design
            .columns
            .iter()
            .zip(&scale)
            .map(|(c, &s)| {
                if s > 0.0 {
                    c.iter().map(|v| v / s).collect()
                } else {
                    vec![0.0; c.len()]
                }
            })
            .collect();
        let mut gram = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let g = dot(&scaled[i], &scaled[j]) / n;
                gram[i * p + j] = g;
                gram[j * p + i] = g;
            }
        }
        let xty = scaled.iter().map(|c| dot(c, &design.y) / n).collect();
        let yty = dot(&design.y, &design.y) / n;
        let penalized = (0..p)
            .map(|j| !(design.has_intercept && j == 0 && !opts.penalize_intercept))
            .collect();
        Self {
            n_cols: p,
            scale,
            gram,
            xty,
            yty,
            penalized,
        }
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n_cols + j]
    }

    fn is_free(&self, j: usize) -> bool {
        self.scale[j] > 0.0 && self.g(j, j) > 0.0
    }

    fn penalty(&self, j: usize, lambda: f64) -> f64 {
        if self.penalized[j] {
            lambda
        } else {
            0.0
        }
    }

    fn objective(&self, beta: &[f64], q: &[f64], lambda: f64) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        let mut pen = 0.0;
        for j in 0..self.n_cols {
            quad += beta[j] * q[j];
            lin += beta[j] * self.xty[j];
            pen += self.penalty(j, lambda) * beta[j].abs();
        }
        quad - 2.0 * lin + self.yty + pen
    }

    /// Largest KKT violation given q = Gβ.
    fn kkt(&self, beta: &[f64], q: &[f64], lambda: f64) -> f64 {
        (0..self.n_cols)
            .filter(|&j| self.is_free(j))
            .map(|j| kkt_violation(2.0 * (self.xty[j] - q[j]), beta[j], self.penalty(j, lambda)))
            .fold(0.0, f64::max)
    }

    /// λ above which every penalized coefficient is zero.
    fn lambda_max(&self) -> f64 {
        // Unpenalized coefficients are first fitted alone (the intercept case).
        let free: Vec<usize> = (0..self.n_cols)
            .filter(|&j| !self.penalized[j] && self.is_free(j))
            .collect();
        let mut beta = vec![0.0; self.n_cols];
        if free.len() == 1 {
            let j = free[0];
            beta[j] = self.xty[j] / self.g(j, j);
        }
        (0..self.n_cols)
            .filter(|&j| self.penalized[j] && self.is_free(j))
            .map(|j| {
                let qj: f64 = (0..self.n_cols).map(|k| self.g(j, k) * beta[k]).sum();
                (2.0 * (self.xty[j] - qj)).abs()
            })
            .fold(0.0, f64::max)
    }

    fn coordinate_update(&self, j: usize, beta: &mut [f64], q: &mut [f64], lambda: f64) -> f64 {
        let gjj = self.g(j, j);
        let rho = self.xty[j] - (q[j] - gjj * beta[j]);
        let new = soft_threshold(rho, 0.5 * self.penalty(j, lambda)) / gjj;
        let delta = new - beta[j];
        if delta != 0.0 {
            beta[j] = new;
            let row = &self.gram[j * self.n_cols..(j + 1) * self.n_cols];
            for (qk, g) in q.iter_mut().zip(row) {
                *qk += delta * g;
            }
        }
        delta.abs()
    }

    fn solve(&self, lambda: f64, warm: Option<&[f64]>, opts: &LassoOptions) -> SolveOutcome {
        let p = self.n_cols;
        let mut beta = match warm {
            Some(w) => w.to_vec(),
            None => vec![0.0; p],
        };
        for j in 0..p {
            if !self.is_free(j) {
                beta[j] = 0.0;
            }
        }
        let mut q: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|k| self.g(i, k) * beta[k]).sum())
            .collect();
        let mut trace = vec![self.objective(&beta, &q, lambda)];
        let all: Vec<usize> = (0..p).filter(|&j| self.is_free(j)).collect();
        let mut sweeps = 0;
        let mut full_sweep = true;
        loop {
            let active: Vec<usize> = if full_sweep {
                all.clone()
            } else {
                all.iter().copied().filter(|&j| beta[j] != 0.0).collect()
            };
            let mut max_change: f64 = 0.0;
            for &j in &active {
                max_change = max_change.max(self.coordinate_update(j, &mut beta, &mut q, lambda));
            }
            sweeps += 1;
            trace.push(self.objective(&beta, &q, lambda));
            let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
            let settled = max_change < opts.tolerance * scale;
            if settled && full_sweep {
                // Recompute q from scratch so the KKT check is free of drift.
                for i in 0..p {
                    q[i] = (0..p).map(|k| self.g(i, k) * beta[k]).sum();
                }
                let kkt = self.kkt(&beta, &q, lambda);
                if kkt <= opts.kkt_tolerance {
                    return SolveOutcome {
                        beta,
                        sweeps,
                        kkt,
                        trace,
                        converged: true,
                    };
                }
            }
            // Iterate on the active set until it settles, then verify with a full sweep.
            full_sweep = settled;
            if sweeps >= opts.max_sweeps {
                let kkt = self.kkt(&beta, &q, lambda);
                return SolveOutcome {
                    beta,
                    sweeps,
                    kkt,
                    trace,
                    converged: false,
                };
            }
        }
    }

    fn unscale(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter()
            .zip(&self.scale)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect()
    }
}

struct SolveOutcome {
    beta: Vec<f64>,
    sweeps: usize,
    kkt: f64,
    trace: Vec<f64>,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Subgradient-condition violation for one coordinate with gradient term
/// `g = (2/N) x_jᵀ(Y - Xw)` and penalty `lambda`.
fn kkt_violation(g: f64, beta: f64, lambda: f64) -> f64 {
    if beta != 0.0 {
        (g - lambda * beta.signum()).abs()
    } else {
        (g.abs() - lambda).max(0.0)
    }
}

/// λ_max = (2/N) max_j |x̃_jᵀ Y| over penalized columns (after fitting any
/// unpenalized intercept).
pub fn lambda_max(design: &DesignMatrix, opts: &LassoOptions) -> f64 {
    Problem::new(design, opts).lambda_max()
}

/// Lasso fit at a single penalty.
pub fn solve(design: &DesignMatrix, lambda: f64, opts: &LassoOptions) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    let prob = Problem::new(design, opts);
    let out = prob.solve(lambda, None, opts);
    finish(design, &prob, lambda, out)
}

fn finish(design: &DesignMatrix, prob: &Problem, lambda: f64, out: SolveOutcome) -> Result<LassoFit> {
    if !out.converged {
        return Err(Error::ConvergenceFailure {
            what: "lasso coordinate descent",
            iterations: out.sweeps,
            residual: out.kkt,
        });
    }
    let weights = prob.unscale(&out.beta);
    Ok(LassoFit {
        n_nonzero: weights.iter().filter(|w| **w != 0.0).count(),
        in_sample_mse: design.mse(&weights),
        weights,
        lambda,
        sweeps: out.sweeps,
        kkt_residual: out.kkt,
        objective_trace: out.trace,
    })
}

/// KKT violation of raw-unit `weights` at `lambda`, evaluated from explicit
/// residuals in the coordinates the solver works in.
pub fn kkt_residual(design: &DesignMatrix, weights: &[f64], lambda: f64, opts: &LassoOptions) -> f64 {
    let prob = Problem::new(design, opts);
    let pred = design.predict(weights);
    let resid: Vec<f64> = design.y.iter().zip(&pred).map(|(y, p)| y - p).collect();
    let n = design.n_rows() as f64;
    (0..design.n_cols())
        .filter(|&j| prob.is_free(j))
        .map(|j| {
            let s = prob.scale[j];
            let g = 2.0 * dot(&design.columns[j], &resid) / (n * s);
            kkt_violation(g, weights[j] * s, prob.penalty(j, lambda))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Warm starts from the previous (larger) penalty.
    #[default]
    Sequential,
    /// Cold starts evaluated concurrently.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub n_lambdas: usize,
    /// Smallest penalty as a fraction of λ_max.
    pub min_ratio: f64,
    /// Relative MSE slack of the plateau rule.
    pub plateau_tolerance: f64,
    pub mode: PathMode,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_lambdas: 100,
            min_ratio: 1e-4,
            plateau_tolerance: 0.01,
            mode: PathMode::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    /// In-sample MSE per grid point; `None` where the solver did not converge.
    pub mse: Vec<Option<f64>>,
    pub n_nonzero: Vec<Option<usize>>,
    pub selected_index: usize,
    pub selected: LassoFit,
}

impl LambdaPath {
    pub fn selected_lambda(&self) -> f64 {
        self.selected.lambda
    }

    pub fn min_mse(&self) -> f64 {
        self.mse.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Summary for audit output: grid, MSE curve, selected penalty and the
    /// nonzero weights.
    pub fn summary_json(&self) -> serde_json::Value {
        let nonzero: Vec<serde_json::Value> = self
            .selected
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| serde_json::json!({"index": i, "weight": w}))
            .collect();
        serde_json::json!({
            "lambda_max": self.lambda_max,
            "lambdas": self.lambdas,
            "mse": self.mse,
            "n_nonzero": self.n_nonzero,
            "selected_index": self.selected_index,
            "selected_lambda": self.selected.lambda,
            "selected_mse": self.selected.in_sample_mse,
            "nonzero_weights": nonzero,
        })
    }
}

/// Log-spaced grid from λ_max down to `min_ratio·λ_max`; selects the largest
/// penalty whose MSE is within `plateau_tolerance` of the grid minimum.
pub fn lambda_path(design: &DesignMatrix, opts: &LassoOptions, path: &PathOptions) -> Result<LambdaPath> {
    if path.n_lambdas == 0 || !(path.min_ratio > 0.0 && path.min_ratio < 1.0) {
        return Err(Error::InvalidInput("invalid lambda grid options".into()));
    }
    let prob = Problem::new(design, opts);
    let lmax = prob.lambda_max();
    if lmax == 0.0 {
        let out = prob.solve(0.0, None, opts);
        let fit = finish(design, &prob, 0.0, out)?;
        return Ok(LambdaPath {
            lambda_max: 0.0,
            lambdas: vec![0.0],
            mse: vec![Some(fit.in_sample_mse)],
            n_nonzero: vec![Some(fit.n_nonzero)],
            selected_index: 0,
            selected: fit,
        });
    }
    let k = path.n_lambdas;
    let lambdas: Vec<f64> = (0..k)
        .map(|i| {
            if k == 1 {
                lmax
            } else {
                lmax * path.min_ratio.powf(i as f64 / (k - 1) as f64)
            }
        })
        .collect();

    let outcomes: Vec<SolveOutcome> = match path.mode {
        PathMode::Sequential => {
            let mut warm: Option<Vec<f64>> = None;
            let mut outs = Vec::with_capacity(k);
            for &l in &lambdas {
                let o = prob.solve(l, warm.as_deref(), opts);
                if o.converged {
                    warm = Some(o.beta.clone());
                }
                outs.push(o);
            }
            outs
        }
        PathMode::Parallel => lambdas
            .par_iter()
            .map(|&l| prob.solve(l, None, opts))
            .collect(),
    };

    let mut fits: Vec<Option<LassoFit>> = Vec::with_capacity(k);
    for (l, o) in lambdas.iter().zip(outcomes) {
        let sweeps = o.sweeps;
        let kkt = o.kkt;
        match finish(design, &prob, *l, o) {
            Ok(f) => fits.push(Some(f)),
            Err(_) => {
                warn!("lasso did not converge at lambda {l:e} ({sweeps} sweeps, kkt {kkt:e}); excluded");
                fits.push(None);
            }
        }
    }
    let mse: Vec<Option<f64>> = fits.iter().map(|f| f.as_ref().map(|f| f.in_sample_mse)).collect();
    let n_nonzero = fits.iter().map(|f| f.as_ref().map(|f| f.n_nonzero)).collect();
    let min = mse.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::ConvergenceFailure {
            what: "lasso path (no grid point converged)",
            iterations: opts.max_sweeps,
            residual: f64::NAN,
        });
    }
    let bound = min * (1.0 + path.plateau_tolerance);
    let selected_index = mse
        .iter()
        .position(|m| matches!(m, Some(v) if *v <= bound))
        .expect("grid minimum satisfies its own bound");
    let selected = fits[selected_index].take().expect("selected point converged");
    Ok(LambdaPath {
        lambda_max: lmax,
        lambdas,
        mse,
        n_nonzero,
        selected_index,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn single_column_closed_form() {
        // One unscaled column: w = soft(xᵀy/N, λ/2) / (xᵀx/N).
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![2.0, 3.0, 7.0];
        let d = DesignMatrix::new(vec![x], y).unwrap();
        let opts = LassoOptions {
            standardize: false,
            ..LassoOptions::default()
        };
        let fit = solve(&d, 0.5, &opts).unwrap();
        let want = (29.0 / 3.0 - 0.25) / (14.0 / 3.0);
        assert!((fit.weights[0] - want).abs() < 1e-12);
    }
}
