use proptest::prelude::*;
use semistatic::pricing::*;

/// Five-point central differences: first and second derivative.
fn d1_fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn d2_fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

fn kind_strategy() -> impl Strategy<Value = OptionKind> {
    prop_oneof![Just(OptionKind::Call), Just(OptionKind::Put)]
}

/// Inputs with the strike within two standard deviations of spot, where
/// prices and sensitivities are well resolved in double precision.
fn inputs_strategy() -> impl Strategy<Value = BsInputs> {
    (
        50.0..20_000.0f64,
        -2.0..2.0f64,
        -0.02..0.10f64,
        0.0..0.05f64,
        0.05..1.0f64,
        0.02..2.0f64,
        kind_strategy(),
    )
        .prop_map(|(spot, z, rate, q, vol, tenor, kind)| BsInputs {
            spot,
            strike: spot * (z * vol * tenor.sqrt()).exp(),
            rate,
            carry_yield: q,
            vol,
            tenor,
            kind,
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn put_call_parity(x in inputs_strategy()) {
        let c = bs_price(&BsInputs { kind: OptionKind::Call, ..x }).unwrap();
        let p = bs_price(&BsInputs { kind: OptionKind::Put, ..x }).unwrap();
        let fwd = x.spot * (-x.carry_yield * x.tenor).exp() - x.strike * (-x.rate * x.tenor).exp();
        prop_assert!(((c - p) - fwd).abs() <= 1e-10 * x.spot, "c {c} p {p} fwd {fwd}");
    }

    #[test]
    fn greeks_match_finite_differences(x in inputs_strategy()) {
        let g = bs_greeks(&x).unwrap();
        let floor = 1e-10 * x.spot;
        let by_spot = |s: f64| bs_price(&x.with_spot(s)).unwrap();
        let by_vol = |v: f64| bs_price(&x.with_vol(v)).unwrap();
        let by_tenor = |t: f64| bs_price(&x.with_tenor(t)).unwrap();
        let hs = 1e-2 * x.spot * x.vol * x.tenor.sqrt();
        let hv = 3e-3 * x.vol;
        let ht = 1e-3 * x.tenor;
        let delta = d1_fd(by_spot, x.spot, hs);
        let gamma = d2_fd(by_spot, x.spot, hs);
        let vega = d1_fd(by_vol, x.vol, hv);
        let volga = d2_fd(by_vol, x.vol, hv);
        let theta = -d1_fd(by_tenor, x.tenor, ht);
        prop_assert!(close(g.delta, delta, 1e-5, 1e-12), "delta {} vs {delta}", g.delta);
        prop_assert!(close(g.gamma, gamma, 1e-5, floor / (x.spot * x.spot)), "gamma {} vs {gamma}", g.gamma);
        prop_assert!(close(g.vega, vega, 1e-5, floor), "vega {} vs {vega}", g.vega);
        // Volga and theta change sign; their errors are measured against the
        // size of their largest analytic term.
        let volga_scale = g.vega / x.vol;
        let theta_scale = g.vega * x.vol / (2.0 * x.tenor)
            + x.rate.abs() * x.strike * (-x.rate * x.tenor).exp()
            + x.carry_yield * x.spot * (-x.carry_yield * x.tenor).exp();
        prop_assert!((g.volga - volga).abs() <= 1e-5 * volga_scale, "volga {} vs {volga}", g.volga);
        prop_assert!((g.theta - theta).abs() <= 1e-5 * theta_scale, "theta {} vs {theta}", g.theta);
    }

    #[test]
    fn implied_vol_round_trip(x in inputs_strategy()) {
        let price = bs_price(&x).unwrap();
        let v = implied_vol(price, &x).unwrap();
        prop_assert!((v - x.vol).abs() <= 1e-8, "{v} vs {}", x.vol);
    }

    #[test]
    fn price_bounded_by_intrinsic_and_underlying(x in inputs_strategy()) {
        let v = bs_price(&x).unwrap();
        prop_assert!(v >= x.intrinsic() - 1e-12 * x.spot);
        let cap = match x.kind {
            OptionKind::Call => x.spot * (-x.carry_yield * x.tenor).exp(),
            OptionKind::Put => x.strike * (-x.rate * x.tenor).exp(),
        };
        prop_assert!(v <= cap);
    }

    #[test]
    fn call_price_is_monotone_in_vol(x in inputs_strategy(), bump in 0.001..0.5f64) {
        let lo = bs_price(&x).unwrap();
        let hi = bs_price(&x.with_vol(x.vol + bump)).unwrap();
        prop_assert!(hi >= lo);
    }
}

#[test]
fn price_below_intrinsic_has_no_implied_vol() {
    let x = BsInputs {
        spot: 100.0,
        strike: 80.0,
        rate: 0.0,
        carry_yield: 0.0,
        vol: 0.0,
        tenor: 0.5,
        kind: OptionKind::Call,
    };
    assert!(matches!(implied_vol(19.0, &x), Err(semistatic::Error::NoImpliedVol { .. })));
}
