//! Static replication of a longer-dated call by short-dated calls at
//! Gauss-Hermite strikes.
//!
//! Under Black-Scholes dynamics between T1 and T2 the target's value at T1 is
//! spanned by T1 calls with density given by its gamma in the strike. The
//! substitution d1(K) = √2·x turns that integral into a Gauss-Hermite rule:
//! nodes x_j map to strikes K_j = K*·exp(√2·x_j·σ√τ − (r − q + σ²/2)τ) and the
//! call weights are e^{−qτ}·w_j/√π, with τ = T2 − T1.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{HedgeDiagnostics, HedgePortfolio, Position, TargetSpec, DEFAULT_COST_RATE};
use crate::error::{Error, Result};
use crate::market_data::{liquid_quotes, MarketSnapshot, OptionKind, QuantilePooling};
use crate::pricing::{price_unchecked, BsInputs};
use crate::vol_surface::{HedgeDates, VolSurface};

/// Nodes (ascending) and weights of the n-point Gauss-Hermite rule for the
/// weight function e^{−x²}, by Newton iteration on the orthonormal Hermite
/// recurrence.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidInput("Gauss-Hermite rule needs n >= 1".into()));
    }
    const PI_M4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PI_M4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceFailure {
                what: "Gauss-Hermite node",
                iterations: 100,
                residual: z,
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok((x, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrWuConfig {
    pub n_nodes: usize,
    /// Snap theoretical strikes to listed liquid strikes.
    pub snap: bool,
    /// Relative distance beyond which a snap is reported.
    pub snap_warn_distance: f64,
    pub cost_rate: f64,
    pub pooling: QuantilePooling,
}

impl Default for CarrWuConfig {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            snap: true,
            snap_warn_distance: 0.2,
            cost_rate: DEFAULT_COST_RATE,
            pooling: QuantilePooling::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrWuNode {
    pub node: f64,
    pub quadrature_weight: f64,
    pub vol: f64,
    pub strike: f64,
    pub weight: f64,
}

/// Theoretical strikes and call weights. `vol_at_strike` gives the vol used
/// for the node's strike; the strike/vol pair is solved by fixed-point
/// iteration since each depends on the other.
pub fn carr_wu_strikes(
    k_star: f64,
    tau: f64,
    rate: f64,
    dividend_yield: f64,
    n: usize,
    vol_at_strike: impl Fn(f64) -> f64,
) -> Result<Vec<CarrWuNode>> {
    let (xs, ws) = gauss_hermite(n)?;
    let strike_for = |x: f64, vol: f64| {
        k_star
            * (std::f64::consts::SQRT_2 * x * vol * tau.sqrt()
                - (rate - dividend_yield + 0.5 * vol * vol) * tau)
                .exp()
    };
    let scale = (-dividend_yield * tau).exp() / std::f64::consts::PI.sqrt();
    let mut out = Vec::with_capacity(n);
    for (x, w) in xs.into_iter().zip(ws) {
        let mut vol = vol_at_strike(k_star);
        let mut k = strike_for(x, vol);
        for _ in 0..100 {
            let v = vol_at_strike(k);
            let done = (v - vol).abs() < 1e-12;
            vol = v;
            k = strike_for(x, vol);
            if done {
                break;
            }
        }
        out.push(CarrWuNode {
            node: x,
            quadrature_weight: w,
            vol,
            strike: k,
            weight: scale * w,
        });
    }
    Ok(out)
}

/// Carr-Wu static hedge for a call target. Node vols come from the surface
/// at the short tenor; strikes are snapped to the nearest liquid weekly call
/// (ties to the lower strike) and duplicate strikes aggregated.
pub fn build_carr_wu_hedge(
    snapshot: &MarketSnapshot,
    surface: &VolSurface,
    target: TargetSpec,
    config: &CarrWuConfig,
) -> Result<HedgePortfolio> {
    if target.kind != OptionKind::Call {
        return Err(Error::InvalidInput("Carr-Wu hedge is defined for call targets only".into()));
    }
    if config.n_nodes == 0 {
        return Err(Error::InvalidInput("Carr-Wu hedge needs at least one node".into()));
    }
    let dates = HedgeDates {
        t0: snapshot.as_of,
        t1: snapshot.weekly_expiry,
        t2: target.expiry,
    };
    if !(dates.t0 < dates.t1 && dates.t1 <= dates.t2) {
        return Err(Error::InvalidInput("Carr-Wu hedge needs t0 < t1 <= t2".into()));
    }
    let (tau10, tau21) = (dates.tau10(), dates.tau21());
    let target_yield = snapshot.carry(dates.t2)?.dividend_yield;
    let weekly_yield = snapshot.carry(dates.t1)?.dividend_yield;
    let spot = snapshot.spot;
    let nodes = carr_wu_strikes(target.strike, tau21, snapshot.rate, target_yield, config.n_nodes, |k| {
        surface.vol_at(spot / k, tau10)
    })?;

    let mut warnings = Vec::new();
    let mut positions: Vec<Position> = Vec::new();
    if config.snap {
        let mut listed: Vec<(f64, f64)> = liquid_quotes(snapshot, dates.t1, config.pooling)
            .into_iter()
            .filter(|q| q.kind == OptionKind::Call)
            .map(|q| (q.strike, q.close))
            .collect();
        listed.sort_by(|a, b| a.0.total_cmp(&b.0));
        if listed.is_empty() {
            return Err(Error::NoLiquidCandidates { date: snapshot.as_of });
        }
        for node in &nodes {
            let (strike, close) = nearest_lower_on_tie(&listed, node.strike);
            let dist = (strike / node.strike - 1.0).abs();
            if dist > config.snap_warn_distance {
                let msg = format!(
                    "Carr-Wu strike {:.2} snapped to {strike} ({:.1}% away) on {}",
                    node.strike,
                    100.0 * dist,
                    snapshot.as_of
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            match positions.iter_mut().find(|p| p.strike == strike) {
                Some(p) => p.weight += node.weight,
                None => positions.push(Position {
                    strike,
                    kind: OptionKind::Call,
                    weight: node.weight,
                    price: close,
                }),
            }
        }
        positions.sort_by(|a, b| a.strike.total_cmp(&b.strike));
    } else {
        for node in &nodes {
            let price = price_unchecked(&BsInputs {
                spot,
                strike: node.strike,
                rate: snapshot.rate,
                carry_yield: weekly_yield,
                vol: surface.vol_at(spot / node.strike, tau10),
                tenor: tau10,
                kind: OptionKind::Call,
            });
            positions.push(Position {
                strike: node.strike,
                kind: OptionKind::Call,
                weight: node.weight,
                price,
            });
        }
    }
    let setup_cost =
        HedgePortfolio::compute_setup_cost(&positions, 0.0, snapshot.rate, dates.t0, dates.t1, config.cost_rate);
    Ok(HedgePortfolio {
        as_of: dates.t0,
        expiry: dates.t1,
        positions,
        cash: 0.0,
        rate: snapshot.rate,
        setup_cost,
        diagnostics: HedgeDiagnostics {
            n_nonzero: Some(nodes.len()),
            warnings,
            ..HedgeDiagnostics::default()
        },
    })
}

/// Closest listed strike to `k` in a strike-sorted list; equidistant
/// neighbours resolve to the lower strike.
fn nearest_lower_on_tie(listed: &[(f64, f64)], k: f64) -> (f64, f64) {
    let i = listed.partition_point(|(s, _)| *s < k);
    if i == 0 {
        return listed[0];
    }
    if i == listed.len() {
        return listed[i - 1];
    }
    let (lo, hi) = (listed[i - 1], listed[i]);
    if (hi.0 - k) < (k - lo.0) {
        hi
    } else {
        lo
    }
}
