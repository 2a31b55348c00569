use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{spa_test_losses, LossMatrix, SpaOptions, SpaResult};
use crate::error::{Error, Result};

/// One universe of the comparison: loss series of every model under one
/// (index, option kind, moneyness, loss function) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanUniverse {
    pub label: String,
    pub losses: LossMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// model → universe → SPA result with that model as benchmark.
    pub results: BTreeMap<String, BTreeMap<String, SpaResult>>,
    /// Universes in which each model, as benchmark, was rejected.
    pub rejected_in: BTreeMap<String, Vec<String>>,
    /// Models never rejected as benchmark while every other model was
    /// rejected at least once.
    pub universally_superior: Vec<String>,
}

/// Runs the SPA test with every model as benchmark in every universe.
pub fn best_model_scan(universes: &[ScanUniverse], opts: &SpaOptions) -> Result<ScanReport> {
    if universes.is_empty() {
        return Err(Error::InvalidInput("best-model scan needs at least one universe".into()));
    }
    let jobs: Vec<(usize, usize)> = universes
        .iter()
        .enumerate()
        .flat_map(|(u, uni)| (0..uni.losses.labels.len()).map(move |m| (u, m)))
        .collect();
    let outcomes: Vec<Result<SpaResult>> = jobs
        .par_iter()
        .map(|&(u, m)| spa_test_losses(&universes[u].losses.with_benchmark(m), opts))
        .collect();

    let mut results: BTreeMap<String, BTreeMap<String, SpaResult>> = BTreeMap::new();
    for (&(u, m), res) in jobs.iter().zip(outcomes) {
        let uni = &universes[u];
        results
            .entry(uni.losses.labels[m].clone())
            .or_default()
            .insert(uni.label.clone(), res?);
    }
    let rejected_in: BTreeMap<String, Vec<String>> = results
        .iter()
        .map(|(model, per)| {
            let rej = per
                .iter()
                .filter(|(_, r)| r.rejects())
                .map(|(u, _)| u.clone())
                .collect();
            (model.clone(), rej)
        })
        .collect();
    let universally_superior = rejected_in
        .iter()
        .filter(|(model, rej)| {
            rej.is_empty()
                && rejected_in
                    .iter()
                    .all(|(other, orej)| other == *model || !orej.is_empty())
        })
        .map(|(m, _)| m.clone())
        .collect();
    Ok(ScanReport {
        results,
        rejected_in,
        universally_superior,
    })
}
