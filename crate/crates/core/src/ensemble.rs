//! Monte Carlo ensembles. Trajectory `k` always uses
//! `derive_trajectory_seed(master_seed, k)`, so results do not depend on the
//! number of workers or the order in which trajectories finish.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RawConfig, SimConfig};
use crate::error::{Error, Result};
use crate::seed::derive_trajectory_seed;
use crate::state::{Diagnostics, TrajectoryRecord};
use crate::trajectory::RunContext;

/// Largest tolerated fraction of aborted trajectories.
pub const MAX_ABORT_RATE: f64 = 0.01;

/// Clamp rate above which an ensemble is flagged.
pub const CLAMP_RATE_FLAG: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub master_seed: u64,
    pub config: RawConfig,
    pub trajectories: usize,
    pub aborted: usize,
    pub abort_rate: f64,
    /// Up to ten `(trajectory, reason)` pairs.
    pub abort_examples: Vec<(usize, String)>,
    pub events: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub manifest: Manifest,
    pub records: Vec<TrajectoryRecord>,
}

impl EnsembleResult {
    /// Trajectories that ran to completion.
    pub fn surviving(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| !r.aborted())
    }

    pub fn check_abort_rate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.abort_rate > MAX_ABORT_RATE {
            return Err(Error::AbortRate {
                aborted: m.aborted,
                total: m.trajectories,
                rate: m.abort_rate,
            });
        }
        Ok(())
    }
}

/// Runs `config.run.ensemble_n` trajectories; fails if more than 1% abort.
pub fn run_ensemble(config: &SimConfig) -> Result<EnsembleResult> {
    let result = run_ensemble_unchecked(config, config.run.workers)?;
    result.check_abort_rate()?;
    Ok(result)
}

/// Runs the ensemble on at most `workers` threads (all cores when `None`),
/// without judging the abort rate.
pub fn run_ensemble_unchecked(config: &SimConfig, workers: Option<usize>) -> Result<EnsembleResult> {
    let ctx = RunContext::new(config)?;
    let n = config.run.ensemble_n;
    let seed = config.run.master_seed;
    let work = || -> Vec<TrajectoryRecord> {
        (0..n)
            .into_par_iter()
            .map(|k| ctx.run(k, derive_trajectory_seed(seed, k as u64)))
            .collect()
    };
    let records = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut diagnostics = Diagnostics::default();
    let mut aborted = 0;
    let mut abort_examples = Vec::new();
    let mut events = 0;
    for r in &records {
        diagnostics.merge(&r.diagnostics);
        events += r.events.len();
        if let Some(reason) = &r.abort {
            aborted += 1;
            if abort_examples.len() < 10 {
                abort_examples.push((r.index, reason.clone()));
            }
        }
    }
    if aborted > 0 {
        log::warn!("{aborted} of {n} trajectories aborted");
    }
    if diagnostics.clamp_rate() > CLAMP_RATE_FLAG {
        log::warn!(
            "velocity clamp rate {:.2e} exceeds {CLAMP_RATE_FLAG:e}; consider a smaller dt",
            diagnostics.clamp_rate()
        );
    }
    Ok(EnsembleResult {
        manifest: Manifest {
            version: crate::VERSION.to_string(),
            master_seed: seed,
            config: config.to_raw(),
            trajectories: n,
            aborted,
            abort_rate: aborted as f64 / n as f64,
            abort_examples,
            events,
            diagnostics,
        },
        records,
    })
}
