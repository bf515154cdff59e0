//! Independent runs across seeds and strategies.
//!
//! Each run owns its store, so runs share nothing but the input config. With
//! the `parallel` feature (on by default) runs are spread over the rayon
//! pool; without it they execute in order on the calling thread. Results come
//! back in input order either way.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::monitor::Strategy;
use crate::sim::{simulate, SimulationConfig, SimulationReport};

pub fn sweep_seeds_sequential(base: &SimulationConfig, seeds: &[u64]) -> Result<Vec<SimulationReport>> {
    seeds.iter().map(|&seed| simulate(&base.with_seed(seed))).collect()
}

#[cfg(feature = "parallel")]
pub fn sweep_seeds_parallel(base: &SimulationConfig, seeds: &[u64]) -> Result<Vec<SimulationReport>> {
    seeds.par_iter().map(|&seed| simulate(&base.with_seed(seed))).collect()
}

/// One report per seed, in seed order.
pub fn sweep_seeds(base: &SimulationConfig, seeds: &[u64]) -> Result<Vec<SimulationReport>> {
    #[cfg(feature = "parallel")]
    return sweep_seeds_parallel(base, seeds);
    #[cfg(not(feature = "parallel"))]
    return sweep_seeds_sequential(base, seeds);
}

fn run_configs(configs: Vec<SimulationConfig>) -> Result<Vec<SimulationReport>> {
    #[cfg(feature = "parallel")]
    return configs.par_iter().map(simulate).collect();
    #[cfg(not(feature = "parallel"))]
    return configs.iter().map(simulate).collect();
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub reports: Vec<SimulationReport>,
    pub step_totals: BTreeMap<Strategy, u64>,
}

impl ComparisonReport {
    pub fn from_reports(seed: u64, reports: Vec<SimulationReport>) -> Self {
        let step_totals = reports.iter().map(|r| (r.config.strategy, r.totals.total_steps)).collect();
        Self { seed, reports, step_totals }
    }

    pub fn get(&self, strategy: Strategy) -> Option<&SimulationReport> {
        self.reports.iter().find(|r| r.config.strategy == strategy)
    }
}

/// Runs `base` under each strategy with the same seed.
pub fn compare_strategies(base: &SimulationConfig) -> Result<ComparisonReport> {
    let configs = Strategy::ALL.iter().map(|&s| base.with_strategy(s)).collect();
    Ok(ComparisonReport::from_reports(base.seed, run_configs(configs)?))
}

/// [`compare_strategies`] for every seed.
pub fn compare_seeds(base: &SimulationConfig, seeds: &[u64]) -> Result<Vec<ComparisonReport>> {
    let configs: Vec<SimulationConfig> =
        seeds.iter().flat_map(|&seed| Strategy::ALL.map(|s| base.with_seed(seed).with_strategy(s))).collect();
    let mut reports = run_configs(configs)?.into_iter();
    Ok(seeds
        .iter()
        .map(|&seed| ComparisonReport::from_reports(seed, reports.by_ref().take(Strategy::ALL.len()).collect()))
        .collect())
}
