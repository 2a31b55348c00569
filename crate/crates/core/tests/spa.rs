use semistatic::rng::CounterRng;
use semistatic::spa::*;

fn normals(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let rng = CounterRng::new(seed);
    (0..n as u64).map(|i| rng.normal(stream, i)).collect()
}

fn ar1(seed: u64, phi: f64, n: usize) -> Vec<f64> {
    let e = normals(seed, 0, n);
    let mut x = vec![0.0; n];
    for t in 1..n {
        x[t] = phi * x[t - 1] + e[t];
    }
    x
}

#[test]
fn mean_block_length_matches_geometric_law() {
    for p in [0.1, 0.25, 0.5] {
        let sb = StationaryBootstrap::new(100, p, 42).unwrap();
        let draws = sb.block_lengths(0, 1_000_000);
        let mean = draws.iter().sum::<usize>() as f64 / draws.len() as f64;
        assert!((mean * p - 1.0).abs() < 0.01, "p {p}: mean {mean}");
    }
}

#[test]
fn resampled_blocks_are_contiguous_runs() {
    let sb = StationaryBootstrap::new(200, 0.05, 9).unwrap();
    let idx = sb.indices(3);
    let continuing = idx.windows(2).filter(|w| w[1] == (w[0] + 1) % 200).count();
    // With mean block length 20, about 95% of steps continue the current block.
    assert!(continuing as f64 / 199.0 > 0.85);
}

#[test]
fn resampled_cross_covariance_tracks_sample_covariance() {
    let n = 2000;
    let x = normals(3, 0, n);
    let z = normals(3, 1, n);
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 0.6 * a + 0.8 * b).collect();
    let cov = |u: &[f64], v: &[f64]| {
        let mu = u.iter().sum::<f64>() / u.len() as f64;
        let mv = v.iter().sum::<f64>() / v.len() as f64;
        u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / u.len() as f64
    };
    let target = cov(&x, &y);
    let sb = StationaryBootstrap::new(n, 0.1, 8).unwrap();
    let mut acc = 0.0;
    let reps = 200;
    for b in 0..reps {
        let idx = sb.indices(b);
        let rx: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let ry: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        acc += cov(&rx, &ry);
    }
    assert!((acc / reps as f64 - target).abs() < 0.01, "{} vs {target}", acc / reps as f64);
}

#[test]
fn white_noise_has_short_blocks() {
    let x = normals(11, 0, 1000);
    let b = optimal_block_length(&x);
    assert!(b <= 3.0, "b* = {b}");
}

#[test]
fn persistent_series_has_long_blocks() {
    let x = ar1(12, 0.9, 2000);
    let b = optimal_block_length(&x);
    assert!(b > 10.0, "b* = {b}");
    let p = auto_block_length(&[x]);
    assert!((p - 1.0 / b).abs() < 1e-15);
}

#[test]
fn stationarity_verdicts() {
    let wn = normals(21, 0, 2000);
    let r = stationarity_checks(&wn);
    assert_eq!(r.adf_rejects_unit_root, Some(true), "{r:?}");
    assert_eq!(r.kpss_rejects_stationarity, Some(false), "{r:?}");

    let mut walk = normals(22, 0, 2000);
    for t in 1..walk.len() {
        walk[t] += walk[t - 1];
    }
    let r = stationarity_checks(&walk);
    assert_eq!(r.adf_rejects_unit_root, Some(false), "{r:?}");
    assert_eq!(r.kpss_rejects_stationarity, Some(true), "{r:?}");
}

#[test]
fn adf_matches_least_squares_oracle_without_lags() {
    // Δy = a + g·y_{t-1}: closed-form simple regression of Δy on y_{t-1}.
    let x = ar1(30, 0.5, 300);
    let (t, nobs) = adf_statistic(&x, 0).unwrap();
    let ylag = &x[..x.len() - 1];
    let dy: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let n = dy.len() as f64;
    let mx = ylag.iter().sum::<f64>() / n;
    let my = dy.iter().sum::<f64>() / n;
    let sxx: f64 = ylag.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = ylag.iter().zip(&dy).map(|(a, b)| (a - mx) * (b - my)).sum();
    let g = sxy / sxx;
    let a = my - g * mx;
    let rss: f64 = ylag.iter().zip(&dy).map(|(x, y)| (y - a - g * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    assert_eq!(nobs, dy.len());
    assert!((t - g / se).abs() < 1e-9 * (g / se).abs());
}

#[test]
fn kpss_by_hand_with_zero_bandwidth() {
    let x = [1.0, 3.0, 2.0, 5.0, 4.0];
    // mean 3, residuals -2 0 -1 2 1, partial sums -2 -2 -3 -1 0, Σ S² = 18, σ² = 10/5.
    let k = kpss_statistic(&x, 0);
    assert!((k - 18.0 / (25.0 * 2.0)).abs() < 1e-15);
}

#[test]
fn identical_losses_give_zero_relative_performance() {
    let l = vec![1.0, 2.0, 0.5];
    let m = LossMatrix::new(vec!["a".into(), "b".into()], vec![l.clone(), l], LossKind::Squared).unwrap();
    assert_eq!(relative_performance(&m).unwrap(), vec![vec![0.0; 3]]);
}

#[test]
fn uniformly_better_benchmark_gives_minus_one() {
    let b = vec![1.0, 2.0, 3.0];
    let a: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
    let m = LossMatrix::new(vec!["a".into(), "b".into()], vec![b, a], LossKind::Absolute).unwrap();
    assert_eq!(relative_performance(&m).unwrap(), vec![vec![-1.0; 3]]);
}

#[test]
fn p_values_are_ordered() {
    for seed in 0..20 {
        let r: Vec<Vec<f64>> = (0..4)
            .map(|m| normals(seed, m, 250).iter().map(|v| v + 0.05 * (m as f64 - 2.0)).collect())
            .collect();
        let res = spa_test(&r, &SpaOptions { n_boot: 300, seed, p_geo: None }).unwrap();
        assert!(0.0 <= res.p_lower && res.p_lower <= res.p_consistent);
        assert!(res.p_consistent <= res.p_upper && res.p_upper <= 1.0);
    }
}

#[test]
fn benchmark_strictly_better_is_not_rejected() {
    let reps = 200;
    let mut kept = 0;
    for rep in 0..reps {
        let r = vec![normals(1000 + rep, 0, 250).iter().map(|v| v - 1.0).collect::<Vec<_>>()];
        let res = spa_test(&r, &SpaOptions { n_boot: 500, seed: rep, p_geo: None }).unwrap();
        if res.p_consistent > 0.05 {
            kept += 1;
        }
    }
    assert!(kept as f64 >= 0.99 * reps as f64, "{kept}/{reps}");
}

#[test]
fn duplicated_alternative_leaves_statistic_unchanged() {
    let r: Vec<Vec<f64>> = (0..3).map(|m| normals(77, m, 250)).collect();
    let opts = SpaOptions { n_boot: 1000, seed: 4, p_geo: Some(0.3) };
    let base = spa_test(&r, &opts).unwrap();
    let mut dup = r.clone();
    dup.push(r[1].clone());
    let with_dup = spa_test(&dup, &opts).unwrap();
    assert_eq!(base.statistic, with_dup.statistic);
    // Shared seed and block parameter: resamples coincide, so the maxima do too.
    assert_eq!(base.p_consistent, with_dup.p_consistent);
    assert_eq!(base.p_lower, with_dup.p_lower);
    assert_eq!(base.p_upper, with_dup.p_upper);
}

#[test]
fn zero_variance_alternative_is_excluded() {
    let r = vec![normals(5, 0, 100), vec![0.3; 100]];
    let res = spa_test(&r, &SpaOptions { n_boot: 200, seed: 1, p_geo: None }).unwrap();
    assert_eq!(res.excluded, vec![1]);
    assert!(!res.warnings.is_empty());
}

#[test]
fn scan_with_identical_models_flags_nobody() {
    let l = normals(8, 0, 100).iter().map(|v| v.abs()).collect::<Vec<_>>();
    let u = ScanUniverse {
        label: "u".into(),
        losses: LossMatrix::new(vec!["a".into(), "b".into()], vec![l.clone(), l], LossKind::Absolute).unwrap(),
    };
    let rep = best_model_scan(&[u], &SpaOptions { n_boot: 200, seed: 0, p_geo: None }).unwrap();
    assert!(rep.universally_superior.is_empty());
    assert!(rep.rejected_in.values().all(|v| v.is_empty()));
}

#[test]
fn scan_flags_dominant_model() {
    let universes: Vec<ScanUniverse> = (0..3u64)
        .map(|u| {
            let base: Vec<f64> = normals(50 + u, 0, 250).iter().map(|v| v.abs()).collect();
            let cols = vec![
                base.clone(),
                normals(50 + u, 1, 250).iter().zip(&base).map(|(e, b)| b + 0.8 + 0.3 * e).collect(),
                normals(50 + u, 2, 250).iter().zip(&base).map(|(e, b)| b + 1.2 + 0.3 * e).collect(),
            ];
            ScanUniverse {
                label: format!("u{u}"),
                losses: LossMatrix::new(vec!["A".into(), "B".into(), "C".into()], cols, LossKind::Absolute)
                    .unwrap(),
            }
        })
        .collect();
    let rep = best_model_scan(&universes, &SpaOptions { n_boot: 300, seed: 2, p_geo: None }).unwrap();
    assert_eq!(rep.universally_superior, vec!["A".to_string()]);
    assert!(rep.rejected_in["A"].is_empty());
    assert_eq!(rep.rejected_in["B"].len(), 3);
    assert_eq!(rep.rejected_in["C"].len(), 3);
}
