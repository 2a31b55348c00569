//! Stationary bootstrap with geometric block lengths and the automatic
//! block-length rule based on a flat-top lag window.

use log::warn;

use crate::error::{Error, Result};
use crate::rng::{CounterRng, StreamRng};

/// Circular block resampler. Replicate `b` draws from counter stream `b` of
/// the seed, so replicates are independent of evaluation order.
#[derive(Debug, Clone)]
pub struct StationaryBootstrap {
    n: usize,
    p_geo: f64,
    rng: CounterRng,
}

impl StationaryBootstrap {
    pub fn new(n: usize, p_geo: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("bootstrap needs at least one observation".into()));
        }
        if !(p_geo > 0.0 && p_geo <= 1.0) {
            return Err(Error::InvalidInput(format!("block probability {p_geo} outside (0, 1]")));
        }
        Ok(Self {
            n,
            p_geo,
            rng: CounterRng::new(seed),
        })
    }

    pub fn p_geo(&self) -> f64 {
        self.p_geo
    }

    fn block_length(&self, s: &mut StreamRng) -> usize {
        if self.p_geo >= 1.0 {
            return 1;
        }
        let u = s.next_uniform();
        // Inverse CDF of the geometric law on {1, 2, ...}.
        let l = (u.ln() / (1.0 - self.p_geo).ln()).ceil();
        if l.is_finite() && l >= 1.0 {
            l.min(usize::MAX as f64) as usize
        } else {
            1
        }
    }

    /// Row indices of replicate `b`: blocks start uniformly, have geometric
    /// lengths with mean 1/p_geo and wrap around the end of the sample.
    pub fn indices(&self, b: u64) -> Vec<usize> {
        let mut s = self.rng.stream(b);
        let mut out = Vec::with_capacity(self.n);
        while out.len() < self.n {
            let start = s.next_index(self.n);
            let len = self.block_length(&mut s).min(self.n - out.len());
            out.extend((0..len).map(|j| (start + j) % self.n));
        }
        out
    }

    /// `count` untruncated block lengths from replicate stream `b`.
    pub fn block_lengths(&self, b: u64, count: usize) -> Vec<usize> {
        let mut s = self.rng.stream(b);
        (0..count).map(|_| self.block_length(&mut s)).collect()
    }
}

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=max_lag.min(n - 1))
        .map(|k| {
            (k..n).map(|t| (x[t] - mean) * (x[t - k] - mean)).sum::<f64>() / n as f64
        })
        .collect()
}

/// Optimal expected block length b* of the stationary bootstrap for one
/// series (flat-top lag window, bandwidth picked from the autocorrelation
/// cutoff). Returns 1 for a constant series.
pub fn optimal_block_length(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 1.0;
    }
    let nf = n as f64;
    let k_n = ((nf.log10()).sqrt().ceil() as usize).max(5);
    let m_max = (nf.sqrt().ceil() as usize + k_n).min(n - 1);
    let b_max = (3.0 * nf.sqrt()).min(nf / 3.0).ceil().max(1.0);
    let acov = autocovariances(x, m_max);
    if acov[0] <= 0.0 {
        return 1.0;
    }
    let rho: Vec<f64> = acov.iter().map(|g| g / acov[0]).collect();
    let crit = 2.0 * (nf.ln() / nf).sqrt();

    // Smallest lag after which K_N consecutive autocorrelations are insignificant.
    let mut m_hat = None;
    for m in 0..m_max {
        let end = (m + k_n).min(m_max);
        if m + 1 <= end && (m + 1..=end).all(|k| rho[k].abs() < crit) {
            m_hat = Some(m);
            break;
        }
    }
    let m_hat = m_hat.unwrap_or_else(|| {
        (1..=m_max)
            .rev()
            .find(|&k| rho[k].abs() > crit)
            .unwrap_or(0)
    });
    let big_m = (2 * m_hat).min(m_max);

    let flat_top = |t: f64| {
        let t = t.abs();
        if t <= 0.5 {
            1.0
        } else if t <= 1.0 {
            2.0 * (1.0 - t)
        } else {
            0.0
        }
    };
    let (mut g, mut s0) = (0.0, acov[0]);
    for k in 1..=big_m {
        let lam = if big_m == 0 { 0.0 } else { flat_top(k as f64 / big_m as f64) };
        g += 2.0 * lam * k as f64 * acov[k];
        s0 += 2.0 * lam * acov[k];
    }
    let d = 2.0 * s0 * s0;
    if d <= 0.0 || g == 0.0 {
        return 1.0;
    }
    let b = (2.0 * g * g / d).cbrt() * nf.cbrt();
    b.clamp(1.0, b_max)
}

/// Geometric parameter 1/b* for a set of series (b* averaged across them),
/// clamped to [1/n, 1]. Constant series contribute b* = 1 with a warning.
pub fn auto_block_length(columns: &[Vec<f64>]) -> f64 {
    let n = columns.iter().map(Vec::len).max().unwrap_or(0);
    if n == 0 {
        return 1.0;
    }
    if n < 30 {
        warn!("automatic block length with only {n} observations");
    }
    let mut total = 0.0;
    for c in columns {
        let var = autocovariances(c, 0)[0];
        if var <= 0.0 {
            warn!("zero-variance series in block-length selection");
        }
        total += optimal_block_length(c);
    }
    let b = total / columns.len() as f64;
    (1.0 / b).clamp(1.0 / n as f64, 1.0)
}
