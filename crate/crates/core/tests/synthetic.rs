use chrono::{Datelike, NaiveDate, Weekday};
use semistatic::market_data::{year_fraction, MarketData};
use semistatic::pricing::{implied_vol, BsInputs};
use semistatic::synthetic::*;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

#[test]
fn quotes_invert_to_the_generating_vol() {
    let mut spec = WorldSpec::flat(d(2020, 1, 1), d(2020, 2, 28), 0.2, 4);
    spec.vol = VolProcess::Smile { base: 0.18, curvature: 0.6 };
    let data = generate_data(&spec).unwrap();
    let mut checked = 0;
    for (day, quotes) in data.options.iter().step_by(7) {
        let s = data.spot[day];
        for q in quotes.iter().filter(|q| q.expiry > *day && (s / q.strike - 1.0).abs() < 0.1) {
            let x = BsInputs {
                spot: s,
                strike: q.strike,
                rate: spec.rate,
                carry_yield: spec.dividend_yield,
                vol: 0.2,
                tenor: year_fraction(*day, q.expiry),
                kind: q.kind,
            };
            if x.tenor < 7.0 / 365.0 {
                continue;
            }
            let want = spec.vol.vol(s / q.strike, x.tenor);
            let got = implied_vol(q.close, &x).unwrap();
            assert!((got - want).abs() < 1e-7, "{day} {:?} K {}: {got} vs {want}", q.kind, q.strike);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn calendar_and_listings() {
    let spec = WorldSpec { holidays: vec![d(2020, 2, 27)], ..WorldSpec::flat(d(2020, 1, 1), d(2020, 3, 31), 0.2, 1) };
    let data = generate_data(&spec).unwrap();
    assert!(data.spot.keys().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    assert!(!data.spot.contains_key(&d(2020, 2, 27)));
    // The monthly expiry on a holiday rolls back to the previous business day.
    assert!(data.options[&d(2020, 2, 3)].iter().any(|q| q.expiry == d(2020, 2, 26)));
    for (day, quotes) in &data.options {
        assert!(quotes.iter().all(|q| q.expiry >= *day && q.close >= 0.0));
        assert!(!quotes.is_empty());
    }
}

#[test]
fn same_seed_same_world_and_flat_files_round_trip() {
    let spec = WorldSpec::flat(d(2020, 1, 1), d(2020, 1, 31), 0.25, 8);
    let a = generate_data(&spec).unwrap();
    assert_eq!(a, generate_data(&spec).unwrap());
    assert_ne!(a.spot, generate_data(&WorldSpec { seed: 9, ..spec.clone() }).unwrap().spot);
    let dir = tempfile::tempdir().unwrap();
    generate(&spec, dir.path()).unwrap();
    let loaded = MarketData::load(dir.path()).unwrap();
    assert_eq!(loaded.spot.len(), a.spot.len());
    for (k, v) in &a.spot {
        assert!((loaded.spot[k] - v).abs() <= 1e-9 * v);
    }
    assert_eq!(loaded.options.values().map(Vec::len).sum::<usize>(), a.options.values().map(Vec::len).sum::<usize>());
}

#[test]
fn invalid_worlds_are_rejected() {
    let base = WorldSpec::flat(d(2020, 1, 1), d(2020, 1, 31), 0.2, 1);
    assert!(generate_data(&WorldSpec { end: d(2019, 12, 1), ..base.clone() }).is_err());
    assert!(generate_data(&WorldSpec { vol: VolProcess::Flat { vol: -0.1 }, ..base.clone() }).is_err());
    assert!(generate_data(&WorldSpec { spot_vol: Some(-0.1), ..base }).is_err());
}
