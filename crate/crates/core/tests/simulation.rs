use semistatic::math::norm_cdf;
use semistatic::simulation::{simulate_terminal, SimConfig};

fn config(n_paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_paths,
        seed,
        drift: 0.04,
        vol: 0.25,
        tenor: 7.0 / 365.0,
        spot: 12_000.0,
    }
}

#[test]
fn terminal_moments_match_lognormal_law() {
    let c = config(200_000, 3);
    let s = simulate_terminal(&c).unwrap();
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let want = c.spot * (c.drift * c.tenor).exp();
    let var_want = want * want * ((c.vol * c.vol * c.tenor).exp() - 1.0);
    let se = (var_want / n).sqrt();
    assert!((mean - want).abs() < 4.0 * se, "mean {mean} vs {want} (se {se})");

    let logs: Vec<f64> = s.iter().map(|x| (x / c.spot).ln()).collect();
    let lm = logs.iter().sum::<f64>() / n;
    let lv = logs.iter().map(|l| (l - lm).powi(2)).sum::<f64>() / (n - 1.0);
    let sd2 = c.vol * c.vol * c.tenor;
    // Sample variance of a normal has relative sd √(2/n).
    assert!((lv / sd2 - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{lv} vs {sd2}");
}

#[test]
fn log_returns_pass_kolmogorov_smirnov() {
    let c = config(20_000, 9);
    let s = simulate_terminal(&c).unwrap();
    let mu = (c.drift - 0.5 * c.vol * c.vol) * c.tenor;
    let sd = c.vol * c.tenor.sqrt();
    let mut z: Vec<f64> = s.iter().map(|x| ((x / c.spot).ln() - mu) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let dstat = z
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = norm_cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic.
    assert!(dstat < 1.628 / n.sqrt(), "D = {dstat}");
}

#[test]
fn paths_are_prefix_stable_and_seeded() {
    let a = simulate_terminal(&config(5000, 1)).unwrap();
    let b = simulate_terminal(&config(3000, 1)).unwrap();
    assert_eq!(&a[..3000], &b[..]);
    assert_eq!(a, simulate_terminal(&config(5000, 1)).unwrap());
    assert_ne!(a, simulate_terminal(&config(5000, 2)).unwrap());
}
