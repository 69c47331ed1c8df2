//! Alternating minimization of the profile least-squares objective.
//!
//! Each step regresses the scores on the current ranks and then re-matches
//! the scores to the fitted line `a + b k` inside the rank space. Because the
//! previous ranks are feasible for the matching step, the objective can only
//! go down; a step that fails to lower it ends the iteration.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RankError, Result};
use crate::estimators::feature_match::feature_match_linear;
use crate::estimators::ols::{ols_fit, profile_ls_objective, OlsFit};
use crate::estimators::score::ScoreVector;
use crate::rank::{RankSpace, RankVector};

/// Smallest slope magnitude handed to the matching step.
pub const SLOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub max_iters: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub tolerance: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            max_iters: 100,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Number of regression/matching steps performed.
    pub iterations: usize,
    /// Objective of the starting ranks followed by every accepted step.
    pub objective_path: Vec<f64>,
    pub converged: bool,
    /// Steps whose fitted slope was not positive.
    pub nonpositive_slope_steps: Vec<usize>,
    pub final_rank: RankVector,
    pub final_fit: OlsFit,
}

/// Positions `1..n` assigned in ascending score order, ties by index.
pub fn rank_order(s: &ScoreVector) -> RankVector {
    let v = s.values();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut r = vec![0; v.len()];
    for (pos, i) in idx.into_iter().enumerate() {
        r[i] = pos + 1;
    }
    RankVector::new(r).expect("a permutation is a valid rank vector")
}

/// Minimizes `PL(r)` over a rank space carrying a sum-of-squares budget.
pub fn profile_ls_estimate(
    s: &ScoreVector,
    space: &RankSpace,
    init: Option<&RankVector>,
    options: ProfileOptions,
) -> Result<(RankVector, IterationTrace)> {
    check_len(space.n(), s.len())?;
    if space.square_budget().is_none() {
        return Err(RankError::input(
            "profile least squares needs a rank space with a sum-of-squares budget",
        ));
    }
    let mut current = match init {
        Some(r) => {
            if !space.contains(r) {
                return Err(RankError::input("initial ranks lie outside the rank space"));
            }
            r.clone()
        }
        None => rank_order(s),
    };
    let mut objective = profile_ls_objective(s, &current)?;
    let mut fit = ols_fit(s, &current)?;
    let mut trace = IterationTrace {
        iterations: 0,
        objective_path: vec![objective],
        converged: false,
        nonpositive_slope_steps: Vec::new(),
        final_rank: current.clone(),
        final_fit: fit,
    };

    for step in 1..=options.max_iters {
        trace.iterations = step;
        if fit.b_hat <= 0.0 {
            trace.nonpositive_slope_steps.push(step);
        }
        let slope = if fit.b_hat.abs() < SLOPE_FLOOR {
            SLOPE_FLOOR.copysign(if fit.b_hat == 0.0 { 1.0 } else { fit.b_hat })
        } else {
            fit.b_hat
        };
        let proposal = feature_match_linear(s, fit.a_hat, slope, space)?;
        if proposal.is_constant() {
            trace.converged = true;
            break;
        }
        let next = profile_ls_objective(s, &proposal)?;
        if !(next < objective) {
            trace.converged = true;
            break;
        }
        let decrease = objective - next;
        current = proposal;
        objective = next;
        fit = ols_fit(s, &current)?;
        trace.objective_path.push(objective);
        if decrease < options.tolerance {
            trace.converged = true;
            break;
        }
    }
    trace.final_rank = current.clone();
    trace.final_fit = fit;
    Ok((current, trace))
}
