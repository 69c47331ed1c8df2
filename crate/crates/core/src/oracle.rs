//! Exhaustive cross-checks of the fast estimators on small instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::estimators::brute::{argmin_over, BRUTE_FORCE_MAX_N};
use crate::estimators::{
    feature_match, matching_objective, profile_ls_estimate, profile_ls_objective, ProfileOptions,
    ScoreVector,
};
use crate::rank::{default_square_budget, default_sum_budget, RankSpace, RankVector};
use crate::simulation::generate::{random_feasible_rank, rng_from_seed};
use crate::simulation::seed::mix;

/// Two objective values count as equal within this relative tolerance.
pub const MATCH_TOLERANCE: f64 = 1e-12;

/// Match statistics for one estimator against its exhaustive minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub instances: usize,
    pub matches: usize,
    /// Largest `estimate objective - exhaustive minimum`, relative to
    /// `max(1, |minimum|)`.
    pub worst_gap: f64,
    /// Seed of the instance with the worst gap.
    pub worst_seed: u64,
}

impl MatchStats {
    fn new() -> Self {
        MatchStats {
            instances: 0,
            matches: 0,
            worst_gap: 0.0,
            worst_seed: 0,
        }
    }

    fn record(&mut self, seed: u64, got: f64, best: f64, feasible: bool) {
        self.instances += 1;
        let gap = if feasible {
            (got - best) / best.abs().max(1.0)
        } else {
            f64::INFINITY
        };
        if gap <= MATCH_TOLERANCE {
            self.matches += 1;
        }
        if self.instances == 1 || gap > self.worst_gap {
            self.worst_gap = gap;
            self.worst_seed = seed;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.instances == 0 {
            1.0
        } else {
            self.matches as f64 / self.instances as f64
        }
    }

    pub fn all_match(&self) -> bool {
        self.matches == self.instances
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub instances: usize,
    pub seed: u64,
    /// Feature matching over the sum-budget space.
    pub feature_match_sum: MatchStats,
    /// Feature matching over the sum-of-squares space.
    pub feature_match_square: MatchStats,
    /// Alternating profile least squares against the global minimum of `PL`.
    pub profile_ls: MatchStats,
}

impl OracleReport {
    /// Feature matching must agree on every instance; profile least squares
    /// is reported only.
    pub fn passed(&self) -> bool {
        self.feature_match_sum.all_match() && self.feature_match_square.all_match()
    }
}

/// Random abilities and scores. Instances cycle through linear, increasing
/// and unordered abilities, with scores that either follow a hidden rank or
/// crowd one end of the scale so that the budgets bind.
fn matching_instance(n: usize, seed: u64) -> (Vec<f64>, ScoreVector) {
    let mut rng = rng_from_seed(seed);
    let shape = seed % 3;
    let mut theta: Vec<f64> = match shape {
        0 => {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(0.1..2.0);
            (1..=n).map(|k| a + b * k as f64).collect()
        }
        _ => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
    };
    if shape == 1 {
        theta.sort_by(f64::total_cmp);
    }
    let (lo, hi) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| {
            (l.min(t), h.max(t))
        });
    let spread = (hi - lo).max(1e-3);
    let scores = match rng.random_range(0..3) {
        0 => {
            let perm: Vec<usize> = {
                let space = RankSpace::new(n, 1).expect("n >= 1");
                random_feasible_rank(&space, 0, mix(&[seed, 9])).into_inner()
            };
            let noise = rng.random_range(0.0..1.0) * spread;
            perm.iter()
                .map(|&k| theta[k - 1] + noise * rng.random_range(-1.0..1.0))
                .collect()
        }
        1 => {
            let end = if rng.random_bool(0.5) { lo } else { hi };
            (0..n)
                .map(|_| end + 0.2 * spread * rng.random_range(-1.0..1.0))
                .collect()
        }
        _ => (0..n)
            .map(|_| rng.random_range(lo - 0.5 * spread..hi + 0.5 * spread))
            .collect(),
    };
    (theta, ScoreVector::new(scores).expect("finite scores"))
}

/// Budgets drawn between 1 and the defaults, so that both tight and loose
/// spaces are covered.
fn spaces(n: usize, seed: u64) -> Result<(RankSpace, RankSpace)> {
    let mut rng = rng_from_seed(mix(&[seed, 1]));
    let c = rng.random_range(1..=default_sum_budget(n));
    let c2 = rng.random_range(1..=default_square_budget(n));
    Ok((
        RankSpace::new(n, c)?,
        RankSpace::with_square_budget(n, c, c2)?,
    ))
}

fn exhaustive_matching(s: &ScoreVector, theta: &[f64], space: &RankSpace) -> Result<f64> {
    let best = argmin_over(space, |r| Some(matching_objective(s, theta, r)))?;
    Ok(best.map_or(f64::INFINITY, |(_, v)| v))
}

fn exhaustive_profile(s: &ScoreVector, space: &RankSpace) -> Result<f64> {
    // constant vectors leave the slope unidentified and are skipped; their
    // objective (the total sum of squares) is never below any other
    let best = argmin_over(space, |r| {
        if r.is_constant() {
            None
        } else {
            profile_ls_objective(s, r).ok()
        }
    })?;
    Ok(best.map_or(f64::INFINITY, |(_, v)| v))
}

fn profile_instance(n: usize, seed: u64) -> ScoreVector {
    let mut rng = rng_from_seed(seed);
    let space = RankSpace::new(n, 1).expect("n >= 1");
    let truth: RankVector = random_feasible_rank(&space, 0, mix(&[seed, 3]));
    let b = rng.random_range(-0.5..2.0);
    let noise = rng.random_range(0.0..2.0);
    ScoreVector::new(
        truth
            .entries()
            .iter()
            .map(|&k| b * k as f64 + noise * rng.random_range(-1.0..1.0))
            .collect(),
    )
    .expect("finite scores")
}

/// Compares the fast estimators with exhaustive search on `instances`
/// random instances of size `n <= 6`.
pub fn oracle_check(n: usize, instances: usize, seed: u64) -> Result<OracleReport> {
    if n < 3 {
        return Err(RankError::input(format!(
            "oracle check needs n >= 3, got {n}"
        )));
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(RankError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut fm_sum = MatchStats::new();
    let mut fm_sq = MatchStats::new();
    let mut pl = MatchStats::new();
    for k in 0..instances {
        let inst = mix(&[seed, n as u64, k as u64]);
        let (theta, s) = matching_instance(n, inst);
        let (r_space, rp_space) = spaces(n, inst)?;
        for (space, stats) in [(&r_space, &mut fm_sum), (&rp_space, &mut fm_sq)] {
            let got = feature_match(&s, &theta, space)?;
            let best = exhaustive_matching(&s, &theta, space)?;
            stats.record(
                inst,
                matching_objective(&s, &theta, &got),
                best,
                space.contains(&got),
            );
        }

        let s = profile_instance(n, mix(&[inst, 4]));
        let space = RankSpace::default_with_squares(n)?;
        let (got, _) = profile_ls_estimate(&s, &space, None, ProfileOptions::default())?;
        let best = exhaustive_profile(&s, &space)?;
        pl.record(
            inst,
            profile_ls_objective(&s, &got)?,
            best,
            space.contains(&got),
        );
    }
    Ok(OracleReport {
        n,
        instances,
        seed,
        feature_match_sum: fm_sum,
        feature_match_square: fm_sq,
        profile_ls: pl,
    })
}
