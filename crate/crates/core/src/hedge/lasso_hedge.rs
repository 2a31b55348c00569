use serde::{Deserialize, Serialize};

use super::{HedgeDiagnostics, HedgePortfolio, Position, TargetSpec, DEFAULT_COST_RATE};
use crate::error::{Error, Result};
use crate::lasso::{lambda_path, DesignMatrix, LambdaPath, LassoOptions, PathOptions};
use crate::market_data::{
    select_candidates_with, CandidateSet, LiquidityThresholds, MarketSnapshot, QuantilePooling,
};
use crate::pricing::{price_unchecked, BsInputs};
use crate::simulation::{simulate_terminal, SimConfig, DEFAULT_PATHS};
use crate::vol_surface::{forward_vol_unchecked, ForwardVolModel, HedgeDates, VolSurface};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoHedgeSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub lasso: LassoOptions,
    pub path: PathOptions,
    pub cost_rate: f64,
    pub pooling: QuantilePooling,
}

impl Default for LassoHedgeSettings {
    fn default() -> Self {
        Self {
            n_paths: DEFAULT_PATHS,
            seed: 0,
            lasso: LassoOptions::default(),
            path: PathOptions::default(),
            cost_rate: DEFAULT_COST_RATE,
            pooling: QuantilePooling::Joint,
        }
    }
}

/// Scenario set and candidate payoffs for one hedging week, shared by every
/// forward-vol model built on the same surface.
#[derive(Debug, Clone)]
pub struct PreparedWeek {
    pub dates: HedgeDates,
    pub target: TargetSpec,
    pub spot: f64,
    pub rate: f64,
    /// Dividend yield implied by the futures of the target expiry.
    pub target_yield: f64,
    pub sim_vol: f64,
    pub candidates: CandidateSet,
    pub levels: Vec<f64>,
    payoffs: Vec<Vec<f64>>,
    settings: LassoHedgeSettings,
}

#[derive(Debug, Clone)]
pub struct LassoHedge {
    pub portfolio: HedgePortfolio,
    pub path: LambdaPath,
    /// Simulated target values at the short expiry.
    pub target_values: Vec<f64>,
}

impl PreparedWeek {
    /// Steps 1 to 3 of the construction: candidate selection, scenario
    /// simulation under the futures-implied drift and ATM weekly vol, and the
    /// candidate payoff matrix.
    pub fn prepare(
        snapshot: &MarketSnapshot,
        surface: &VolSurface,
        target: TargetSpec,
        settings: &LassoHedgeSettings,
    ) -> Result<Self> {
        snapshot.validate()?;
        let dates = HedgeDates {
            t0: snapshot.as_of,
            t1: snapshot.weekly_expiry,
            t2: target.expiry,
        };
        if !(dates.t0 < dates.t1 && dates.t1 <= dates.t2) {
            return Err(Error::InvalidInput(format!(
                "hedge dates must satisfy t0 < t1 <= t2, got {} {} {}",
                dates.t0, dates.t1, dates.t2
            )));
        }
        let thresholds = LiquidityThresholds::from_quotes(
            snapshot.quotes_for(snapshot.weekly_expiry),
            settings.pooling,
        );
        let candidates = select_candidates_with(snapshot, snapshot.weekly_expiry, &thresholds)?;
        let weekly_carry = snapshot.carry(dates.t1)?;
        let target_yield = snapshot.carry(dates.t2)?.dividend_yield;
        let sim_vol = surface.vol_at(1.0, dates.tau10());
        let levels = simulate_terminal(&SimConfig {
            n_paths: settings.n_paths,
            seed: settings.seed,
            drift: weekly_carry.implied_return,
            vol: sim_vol,
            tenor: dates.tau10(),
            spot: snapshot.spot,
        })?;
        let payoffs = candidates
            .quotes
            .iter()
            .map(|q| levels.iter().map(|s| q.kind.payoff(*s, q.strike)).collect())
            .collect();
        Ok(Self {
            dates,
            target,
            spot: snapshot.spot,
            rate: snapshot.rate,
            target_yield,
            sim_vol,
            candidates,
            levels,
            payoffs,
            settings: *settings,
        })
    }

    /// Target value at the short expiry on each scenario.
    pub fn target_values(&self, surface: &VolSurface, model: ForwardVolModel) -> Vec<f64> {
        let t = self.target;
        if self.dates.t1 == self.dates.t2 {
            return self.levels.iter().map(|s| t.kind.payoff(*s, t.strike)).collect();
        }
        let tau21 = self.dates.tau21();
        self.levels
            .iter()
            .map(|&s1| {
                let vol = forward_vol_unchecked(surface, model, s1, self.spot, t.strike, self.dates);
                price_unchecked(&BsInputs {
                    spot: s1,
                    strike: t.strike,
                    rate: self.rate,
                    carry_yield: self.target_yield,
                    vol,
                    tenor: tau21,
                    kind: t.kind,
                })
            })
            .collect()
    }

    /// Steps 4 and 5: lasso fit over the penalty path and the resulting portfolio.
    pub fn build(&self, surface: &VolSurface, model: ForwardVolModel) -> Result<LassoHedge> {
        let y = self.target_values(surface, model);
        let design = DesignMatrix::with_intercept(self.payoffs.clone(), y.clone())?;
        let path = lambda_path(&design, &self.settings.lasso, &self.settings.path)?;
        let w = &path.selected.weights;
        let positions: Vec<Position> = self
            .candidates
            .quotes
            .iter()
            .zip(&w[1..])
            .filter(|(_, w)| **w != 0.0)
            .map(|(q, w)| Position {
                strike: q.strike,
                kind: q.kind,
                weight: *w,
                price: q.close,
            })
            .collect();
        let cash = w[0];
        let pred = design.predict(w);
        let n = y.len() as f64;
        let mae = pred.iter().zip(&y).map(|(p, v)| (p - v).abs()).sum::<f64>() / n;
        let setup_cost = HedgePortfolio::compute_setup_cost(
            &positions,
            cash,
            self.rate,
            self.dates.t0,
            self.dates.t1,
            self.settings.cost_rate,
        );
        let portfolio = HedgePortfolio {
            as_of: self.dates.t0,
            expiry: self.dates.t1,
            positions,
            cash,
            rate: self.rate,
            setup_cost,
            diagnostics: HedgeDiagnostics {
                in_sample_mae: Some(mae),
                in_sample_rmse: Some(path.selected.in_sample_mse.sqrt()),
                lambda: Some(path.selected.lambda),
                n_nonzero: Some(path.selected.n_nonzero),
                warnings: Vec::new(),
            },
        };
        Ok(LassoHedge {
            portfolio,
            path,
            target_values: y,
        })
    }
}

/// Static hedge of `target` from the snapshot's liquid weekly options.
pub fn build_lasso_hedge(
    snapshot: &MarketSnapshot,
    surface: &VolSurface,
    model: ForwardVolModel,
    target: TargetSpec,
    settings: &LassoHedgeSettings,
) -> Result<LassoHedge> {
    PreparedWeek::prepare(snapshot, surface, target, settings)?.build(surface, model)
}
