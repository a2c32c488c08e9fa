//! Parallel execution of a condition grid.
//!
//! Every `(condition, replication)` pair is an independent work item. Items
//! run on a bounded rayon pool and are collected back in index order, so the
//! results are identical for any worker count.

use bre_core::sim::{grid, Condition, ConditionResult, ConditionSpec};
use rayon::prelude::*;

use crate::config::RunConfig;

pub const WORKERS_ENV: &str = "BRE_SIM_WORKERS";

/// Worker count: explicit flag, then `BRE_SIM_WORKERS`, then the config,
/// then the number of available CPUs.
pub fn resolve_workers(
    flag: Option<usize>,
    env: Option<&str>,
    config: Option<usize>,
) -> Result<usize, String> {
    if let Some(w) = flag {
        return positive(w, "--workers");
    }
    if let Some(s) = env {
        let w: usize = s
            .trim()
            .parse()
            .map_err(|_| format!("{WORKERS_ENV}=`{s}` is not a positive integer"))?;
        return positive(w, WORKERS_ENV);
    }
    if let Some(w) = config {
        return positive(w, "workers");
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn positive(w: usize, what: &str) -> Result<usize, String> {
    if w == 0 {
        Err(format!("{what} must be at least 1"))
    } else {
        Ok(w)
    }
}

/// Condition specs for the configured grid, `rho`-major.
pub fn condition_specs(config: &RunConfig) -> bre_core::Result<Vec<ConditionSpec>> {
    let mut specs = grid(
        &config.rho_levels,
        &config.n_levels,
        config.replications,
        &config.design,
        &config.population,
    )?;
    for s in &mut specs {
        s.overlap_mode = config.overlap_mode;
        s.params = config.params.clone();
    }
    Ok(specs)
}

/// Runs every replication of every condition on `workers` threads.
pub fn run_conditions(
    conditions: &[Condition],
    master_seed: u64,
    workers: usize,
) -> Result<Vec<ConditionResult>, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    let items: Vec<(usize, u32)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(c, cond)| (0..cond.spec().replications as u32).map(move |r| (c, r)))
        .collect();
    log::info!("running {} replications on {workers} workers", items.len());
    let mut records = pool
        .install(|| {
            items
                .par_iter()
                .map(|&(c, r)| conditions[c].run_replication(master_seed, r))
                .collect::<Vec<_>>()
        })
        .into_iter();
    Ok(conditions
        .iter()
        .map(|cond| {
            let recs = records.by_ref().take(cond.spec().replications).collect();
            cond.summarize(recs)
        })
        .collect())
}

/// Builds and runs the whole configured grid.
pub fn run_grid(config: &RunConfig, workers: usize) -> Result<Vec<ConditionResult>, String> {
    let conditions = condition_specs(config)
        .and_then(|specs| {
            specs
                .into_iter()
                .map(Condition::new)
                .collect::<bre_core::Result<Vec<_>>>()
        })
        .map_err(|e| e.to_string())?;
    run_conditions(&conditions, config.master_seed, workers).map_err(|e| e.to_string())
}
