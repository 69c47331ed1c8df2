//! Approximate ranking from pairwise interactions.
//!
//! `n` objects sit at integer positions `r(i)` in `1..=n`, with ties allowed.
//! For every ordered pair `i != j` we observe
//! `X_ij = mu[r(i)][r(j)] + noise`, and the task is to recover `r`.
//!
//! The crate provides:
//!
//! * the mean structures ([`model`]): differential comparisons
//!   `theta_k - theta_l`, additive collaborations `theta_k + theta_l`, and a
//!   Poisson model that is linear on the square-root scale;
//! * feasible rank spaces and `l_q` losses ([`rank`]);
//! * estimators ([`estimators`]): per-object scores, exact constrained
//!   feature matching, alternating profile least squares, and exhaustive
//!   search for small `n`;
//! * Poisson likelihoods and the Bhattacharyya affinity ([`poisson`]);
//! * seeded data generation, a deterministic parallel experiment runner and
//!   regime slope fits ([`simulation`]);
//! * exact identity checks ([`verify`]) and brute-force cross-checks
//!   ([`oracle`]).
//!
//! ```
//! use rank_phase::estimators::{feature_match, score_comparison};
//! use rank_phase::model::{ModelKind, ModelSpec};
//! use rank_phase::rank::{RankSpace, RankVector};
//! use rank_phase::simulation::generate_gaussian;
//!
//! let n = 30;
//! let model = ModelSpec::linear(ModelKind::DifferentialComparison, n, 0.0, 1.0)?;
//! let truth = RankVector::identity(n);
//! let x = generate_gaussian(&model, &truth, 0.5, 7)?;
//!
//! let s = score_comparison(&x, model.theta())?;
//! let r_hat = feature_match(&s, model.theta(), &RankSpace::default_for(n)?)?;
//! assert_eq!(r_hat, truth);
//! # Ok::<(), rank_phase::RankError>(())
//! ```
//!
//! A longer walk-through lives in the `book/` directory of the repository.

pub mod error;
pub mod estimators;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod poisson;
pub mod rank;
pub mod simulation;
pub mod verify;

pub use error::{RankError, Result};
pub use matrix::{InteractionMatrix, MeanMatrix, PairMatrix};
pub use model::{ModelKind, ModelSpec};
pub use rank::{loss, RankSpace, RankVector};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ranks.md")]
    mod ranks {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/poisson.md")]
    mod poisson {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
