//! Replicated Monte Carlo runs over an experiment grid.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::estimators::{
    feature_match, lse_brute_force, profile_ls_estimate, score_adaptive, score_collaboration,
    score_comparison, ProfileOptions, ScoreKind,
};
use crate::model::{ModelKind, ModelSpec};
use crate::poisson::poisson_mle_brute_force;
use crate::rank::{loss, RankSpace, RankVector};
use crate::simulation::config::{EstimatorKind, ExperimentConfig, GridPoint, TrueRankPolicy};
use crate::simulation::generate::{generate_gaussian, generate_poisson, random_feasible_rank};
use crate::simulation::seed::{mix, replication_seed};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RANK_PHASE_THREADS";

/// Loss of order `q` for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QLoss {
    pub q: f64,
    pub loss: f64,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: ModelKind,
    pub n: usize,
    pub snr: f64,
    pub beta: f64,
    pub sigma: f64,
    pub estimator: EstimatorKind,
    pub rep: usize,
    pub seed: u64,
    /// One entry per configured loss order, in configuration order.
    pub losses: Vec<QLoss>,
    pub exact_recovery: bool,
    pub iters: usize,
    pub wall_time_ms: Option<f64>,
}

impl ResultRow {
    pub fn loss(&self, q: f64) -> Option<f64> {
        self.losses.iter().find(|l| l.q == q).map(|l| l.loss)
    }
}

/// Worker count from `RANK_PHASE_THREADS`, or the available parallelism when
/// it is unset or empty.
pub fn worker_count_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(RankError::config(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
        _ => Ok(std::thread::available_parallelism().map_or(1, |p| p.get())),
    }
}

/// Runs every `(grid point, replication)` pair on `threads` workers.
///
/// Rows come back ordered by grid point, then replication, and are a pure
/// function of `config`: the worker count changes only the running time.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let space = config.space()?;
    let grid = config.grid()?;
    let models = grid
        .iter()
        .map(|p| config.model_at(p.beta))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..config.reps).map(move |rep| (g, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RankError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(g, rep)| run_replication(config, &space, grid[g], &models[g], rep))
            .collect()
    })
}

/// A single replication at one grid point.
pub fn run_replication(
    config: &ExperimentConfig,
    space: &RankSpace,
    point: GridPoint,
    model: &ModelSpec,
    rep: usize,
) -> Result<ResultRow> {
    let seed = replication_seed(config.master_seed, point.index, rep);
    let truth = match config.true_rank {
        TrueRankPolicy::Identity => RankVector::identity(config.n),
        TrueRankPolicy::RandomFeasible => random_feasible_rank(space, config.n, mix(&[seed, 2])),
    };
    let data_seed = mix(&[seed, 1]);
    let start = Instant::now();
    let (estimate, iters) = estimate_once(config, space, model, &truth, data_seed)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let losses = config
        .q_list
        .iter()
        .map(|&q| {
            Ok(QLoss {
                q,
                loss: loss(q, &estimate, &truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultRow {
        model: config.model,
        n: config.n,
        snr: point.snr,
        beta: point.beta,
        sigma: config.sigma_column(),
        estimator: config.estimator,
        rep,
        seed,
        losses,
        exact_recovery: estimate == truth,
        iters,
        wall_time_ms: config.record_wall_time.then_some(elapsed),
    })
}

fn estimate_once(
    config: &ExperimentConfig,
    space: &RankSpace,
    model: &ModelSpec,
    truth: &RankVector,
    data_seed: u64,
) -> Result<(RankVector, usize)> {
    if model.kind().is_poisson() {
        let x = generate_poisson(model, truth, data_seed)?;
        return Ok((poisson_mle_brute_force(&x, model, space)?, 0));
    }
    let x = generate_gaussian(model, truth, config.sigma, data_seed)?;
    let theta = model.theta();
    match config.estimator {
        EstimatorKind::FeatureMatchOracleTheta => {
            let s = match model.kind() {
                ModelKind::DifferentialComparison => score_comparison(&x, theta)?,
                _ => score_collaboration(&x)?,
            };
            Ok((feature_match(&s, theta, space)?, 0))
        }
        EstimatorKind::ProfileLsAdaptive => {
            let kind = match model.kind() {
                ModelKind::DifferentialComparison => ScoreKind::Comparison,
                _ => ScoreKind::Collaboration,
            };
            let s = score_adaptive(&x, kind)?;
            let options = ProfileOptions {
                max_iters: config.max_iters,
                ..ProfileOptions::default()
            };
            let (r, trace) = profile_ls_estimate(&s, space, None, options)?;
            Ok((r, trace.iterations))
        }
        EstimatorKind::BruteForce => Ok((lse_brute_force(&x, model, space)?, 0)),
    }
}
