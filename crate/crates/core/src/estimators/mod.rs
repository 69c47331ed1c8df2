//! Rank estimators: scores, constrained feature matching, profile least
//! squares and exhaustive least squares.

pub mod brute;
pub mod feature_match;
pub mod ols;
pub mod profile;
pub mod score;

pub use brute::{lse_brute_force, BRUTE_FORCE_MAX_N};
pub use feature_match::{feature_match, feature_match_linear, matching_objective};
pub use ols::{hat_matrix, ols_fit, profile_ls_objective, profile_ls_objective_via_hat, OlsFit};
pub use profile::{profile_ls_estimate, rank_order, IterationTrace, ProfileOptions};
pub use score::{score_adaptive, score_collaboration, score_comparison, ScoreKind, ScoreVector};
