use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use semistatic::hedge::*;
use semistatic::market_data::{atm_strike, year_fraction, MarketData, OptionKind};
use semistatic::pricing::{bs_greeks, bs_price, BsInputs};
use semistatic::synthetic::{generate_data, WorldSpec};
use semistatic::vol_surface::{ForwardVolModel, Scheme, VolSurface};

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

/// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
/// physicists' Hermite recurrence, weights √π times the squared first
/// eigenvector components.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[test]
fn gauss_hermite_matches_golub_welsch() {
    for n in [1, 2, 3, 4, 5, 8, 10, 16, 25, 40, 50, 64] {
        let (x, w) = gauss_hermite(n).unwrap();
        let (xo, wo) = golub_welsch(n);
        for i in 0..n {
            assert!((x[i] - xo[i]).abs() < 1e-10, "n {n} node {i}: {} vs {}", x[i], xo[i]);
            assert!((w[i] - wo[i]).abs() < 1e-10, "n {n} weight {i}: {} vs {}", w[i], wo[i]);
        }
        let total: f64 = w.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12, "n {n}: Σw = {total}");
    }
}

#[test]
fn gauss_hermite_integrates_polynomials_exactly() {
    // ∫ x^{2k} e^{-x²} dx = Γ(k + 1/2).
    let (x, w) = gauss_hermite(10).unwrap();
    let gamma_half = [1.0, 0.5, 0.75, 1.875, 6.5625];
    for (k, g) in gamma_half.iter().enumerate() {
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k as i32)).sum();
        assert!((q - g * std::f64::consts::PI.sqrt()).abs() < 1e-12, "k {k}");
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k as i32 + 1)).sum();
        assert!(odd.abs() < 1e-12);
    }
}

/// Relative error of the unsnapped Carr-Wu hedge against the target price in
/// a flat Black-Scholes world: ATM call 28 days out, hedge options 7 days out.
fn carr_wu_error(n: usize) -> f64 {
    let (s0, k, r, q, vol) = (10_000.0, 10_000.0, 0.05, 0.01, 0.2);
    let (tau10, tau20) = (7.0 / 365.0, 28.0 / 365.0);
    let nodes = carr_wu_strikes(k, tau20 - tau10, r, q, n, |_| vol).unwrap();
    let price = |strike: f64, tenor: f64| {
        bs_price(&BsInputs {
            spot: s0,
            strike,
            rate: r,
            carry_yield: q,
            vol,
            tenor,
            kind: OptionKind::Call,
        })
        .unwrap()
    };
    let hedge: f64 = nodes.iter().map(|nd| nd.weight * price(nd.strike, tau10)).sum();
    let target = price(k, tau20);
    (hedge / target - 1.0).abs()
}

#[test]
fn carr_wu_hedge_converges_in_node_count() {
    let e3 = carr_wu_error(3);
    let e50 = carr_wu_error(50);
    assert!(e50 < e3, "n=50 {e50} vs n=3 {e3}");
    assert!(e50 < 1e-3, "n=50 error {e50}");
}

fn flat_world() -> MarketData {
    generate_data(&WorldSpec::flat(d(2020, 1, 1), d(2020, 4, 30), 0.2, 1)).unwrap()
}

#[test]
fn carr_wu_build_prices_like_the_target_without_snapping() {
    let data = flat_world();
    let (t0, t1, t2) = (d(2020, 2, 27), d(2020, 3, 5), d(2020, 3, 26));
    let snap = data.snapshot(t0, t1, t2).unwrap();
    let surface = VolSurface::flat(t0, 0.2);
    let strike = atm_strike(snap.spot, snap.quotes_for(t2).map(|q| q.strike)).unwrap();
    let target = TargetSpec { strike, kind: OptionKind::Call, expiry: t2 };
    let cfg = CarrWuConfig { n_nodes: 50, snap: false, ..CarrWuConfig::default() };
    let hedge = build_carr_wu_hedge(&snap, &surface, target, &cfg).unwrap();
    let value: f64 = hedge.positions.iter().map(|p| p.weight * p.price).sum();
    let target_close = snap.quote(t2, strike, OptionKind::Call).unwrap().close;
    assert!((value / target_close - 1.0).abs() < 1e-3, "{value} vs {target_close}");

    let snapped = build_carr_wu_hedge(&snap, &surface, target, &CarrWuConfig::default()).unwrap();
    let listed: Vec<f64> = snap.quotes_for(t1).map(|q| q.strike).collect();
    assert!(snapped.positions.iter().all(|p| listed.contains(&p.strike)));
    let total: f64 = snapped.positions.iter().map(|p| p.weight).sum();
    let unsnapped: f64 = hedge.positions.iter().map(|p| p.weight).sum();
    assert!((total - unsnapped).abs() < 1e-12);

    let put = TargetSpec { kind: OptionKind::Put, ..target };
    assert!(build_carr_wu_hedge(&snap, &surface, put, &cfg).is_err());
}

#[test]
fn lasso_hedge_replicates_target_in_flat_world() {
    let data = flat_world();
    let (t0, t1, t2) = (d(2020, 2, 27), d(2020, 3, 5), d(2020, 3, 26));
    let snap = data.snapshot(t0, t1, t2).unwrap();
    let surface = VolSurface::calibrate(&snap, &[t1, t2], Scheme::Linear, Default::default()).unwrap();
    let strike = atm_strike(snap.spot, snap.quotes_for(t2).map(|q| q.strike)).unwrap();
    for kind in [OptionKind::Call, OptionKind::Put] {
        let target = TargetSpec { strike, kind, expiry: t2 };
        let settings = LassoHedgeSettings { seed: 5, ..LassoHedgeSettings::default() };
        let h = build_lasso_hedge(&snap, &surface, ForwardVolModel::ConstantVol, target, &settings).unwrap();
        let mae = h.portfolio.diagnostics.in_sample_mae.unwrap();
        assert!(mae / snap.spot <= 1e-4, "{kind:?}: MAE/S0 = {}", mae / snap.spot);

        // The frozen portfolio reproduces its own fitted values on the scenarios.
        let prepared = PreparedWeek::prepare(&snap, &surface, target, &settings).unwrap();
        let y = prepared.target_values(&surface, ForwardVolModel::ConstantVol);
        let fitted_mae = prepared
            .levels
            .iter()
            .zip(&y)
            .map(|(s, v)| (h.portfolio.payoff(*s) - v).abs())
            .sum::<f64>()
            / y.len() as f64;
        assert!((fitted_mae - mae).abs() < 1e-9 * snap.spot);

        // Setup cost is near the target premium: the hedge prices the target.
        let premium = snap.quote(t2, strike, kind).unwrap().close;
        let pre_cost = h.portfolio.setup_cost - h.portfolio.transaction_cost(settings.cost_rate);
        assert!((pre_cost / premium - 1.0).abs() < 0.02, "{kind:?}: {pre_cost} vs {premium}");
    }
}

#[test]
fn same_seed_builds_identical_hedges() {
    let data = flat_world();
    let (t0, t1, t2) = (d(2020, 3, 5), d(2020, 3, 12), d(2020, 3, 26));
    let snap = data.snapshot(t0, t1, t2).unwrap();
    let surface = VolSurface::calibrate(&snap, &[t1, t2], Scheme::CubicSpline, Default::default()).unwrap();
    let strike = atm_strike(snap.spot, snap.quotes_for(t2).map(|q| q.strike)).unwrap();
    let target = TargetSpec { strike, kind: OptionKind::Call, expiry: t2 };
    let settings = LassoHedgeSettings { seed: 11, n_paths: 2000, ..LassoHedgeSettings::default() };
    let a = build_lasso_hedge(&snap, &surface, ForwardVolModel::ForwardSmile, target, &settings).unwrap();
    let b = build_lasso_hedge(&snap, &surface, ForwardVolModel::ForwardSmile, target, &settings).unwrap();
    assert_eq!(a.portfolio, b.portfolio);
}

#[test]
fn delta_hedge_state_holds_black_scholes_delta() {
    let data = flat_world();
    let (t0, t1, t2) = (d(2020, 3, 2), d(2020, 3, 5), d(2020, 3, 26));
    let snap = data.snapshot(t0, t1, t2).unwrap();
    let surface = VolSurface::flat(t0, 0.2);
    let strike = atm_strike(snap.spot, snap.quotes_for(t2).map(|q| q.strike)).unwrap();
    let target = TargetSpec { strike, kind: OptionKind::Put, expiry: t2 };
    let st = rebalance_dynamic(&snap, Some(&surface), target, None).unwrap();
    let inputs = BsInputs {
        spot: snap.spot,
        strike,
        rate: 0.05,
        carry_yield: 0.01,
        vol: 0.2,
        tenor: year_fraction(t0, t2),
        kind: OptionKind::Put,
    };
    assert!((st.delta - bs_greeks(&inputs).unwrap().delta).abs() < 1e-10);
    assert!((st.money_market + st.delta * st.spot - st.target_value).abs() < 1e-9);
    assert!((st.target_value - bs_price(&inputs).unwrap()).abs() < 1e-9);

    // Without a surface the previous vol is reused and flagged; without
    // either the rebalance fails.
    let fb = rebalance_dynamic(&snap, None, target, Some(0.3)).unwrap();
    assert!(fb.vol_fallback && fb.vol == 0.3);
    assert!(rebalance_dynamic(&snap, None, target, None).is_err());
}

#[test]
fn delta_hedge_pnl_over_a_day_tracks_the_option() {
    // Small move, one day: the delta-hedged book differs from the option by
    // the second-order term ½Γ(ΔS)² + θ·dt to leading order.
    let inputs = BsInputs {
        spot: 10_000.0,
        strike: 10_000.0,
        rate: 0.05,
        carry_yield: 0.0,
        vol: 0.2,
        tenor: 30.0 / 365.0,
        kind: OptionKind::Call,
    };
    let g = bs_greeks(&inputs).unwrap();
    let v0 = bs_price(&inputs).unwrap();
    let st = DynamicHedgeState {
        date: d(2020, 3, 2),
        spot: inputs.spot,
        delta: g.delta,
        money_market: v0 - g.delta * inputs.spot,
        target_value: v0,
        vol: 0.2,
        vol_fallback: false,
    };
    let ds = 20.0;
    let v1 = bs_price(&inputs.with_spot(inputs.spot + ds).with_tenor(inputs.tenor - 1.0 / 365.0)).unwrap();
    let hedge = dynamic_pnl(&st, inputs.spot + ds, inputs.rate, 1);
    let residual = (v1 - v0) - hedge;
    let want = 0.5 * g.gamma * ds * ds + g.theta / 365.0 - (st.money_market * inputs.rate / 365.0);
    assert!((residual - want).abs() < 0.05 * want.abs().max(0.1), "{residual} vs {want}");
}
