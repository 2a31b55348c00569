//! Terminal index levels under geometric Brownian motion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub const DEFAULT_PATHS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Futures-implied return r'.
    pub drift: f64,
    pub vol: f64,
    /// Years from T0 to T1.
    pub tenor: f64,
    pub spot: f64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be at least 1".into()));
        }
        let finite = [self.drift, self.vol, self.tenor, self.spot]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.vol < 0.0 || self.tenor <= 0.0 || self.spot <= 0.0 {
            return Err(Error::InvalidInput(format!("invalid simulation config {self:?}")));
        }
        Ok(())
    }
}

/// S_i = S0 exp((r' - σ²/2)τ + σ√τ Z_i); draw i depends only on (seed, i).
pub fn simulate_terminal(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let rng = CounterRng::new(config.seed);
    let mu = (config.drift - 0.5 * config.vol * config.vol) * config.tenor;
    let sd = config.vol * config.tenor.sqrt();
    const CHUNK: usize = 1024;
    let out = (0..config.n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(config.n_paths);
            let mut stream = rng.stream(0);
            stream.seek(start as u64);
            (start..end)
                .map(|_| config.spot * (mu + sd * stream.next_normal()).exp())
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(out)
}
