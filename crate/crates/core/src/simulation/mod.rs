//! Synthetic data, replicated experiments and regime fits.

pub mod config;
pub mod generate;
pub mod regimes;
pub mod runner;
pub mod seed;

pub use config::{EstimatorKind, ExperimentConfig, GridPoint, TrueRankPolicy};
pub use generate::{estimate_beta_sq, generate_gaussian, generate_poisson, random_feasible_rank};
pub use regimes::{fit_line, fit_regimes, GridSummary, LineFit, Regime, RegimeReport};
pub use runner::{run_experiment, worker_count_from_env, QLoss, ResultRow, THREADS_ENV};
