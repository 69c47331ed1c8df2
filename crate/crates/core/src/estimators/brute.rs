//! Exhaustive search over small rank spaces.

use crate::error::{check_len, RankError, Result};
use crate::matrix::InteractionMatrix;
use crate::model::{build_mean_matrix, ModelSpec};
use crate::rank::{RankSpace, RankVector};

/// Largest `n` accepted by the exhaustive searches (`6^6 = 46656` candidates).
pub const BRUTE_FORCE_MAX_N: usize = 6;

fn check_size(n: usize) -> Result<()> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(RankError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    Ok(())
}

/// Visits every member of `space` in lexicographic order.
pub fn for_each_member(space: &RankSpace, mut visit: impl FnMut(&RankVector)) -> Result<()> {
    let n = space.n();
    check_size(n)?;
    let mut digits = vec![1usize; n];
    loop {
        let r = RankVector::new(digits.clone()).expect("digits stay in 1..=n");
        if space.contains(&r) {
            visit(&r);
        }
        // odometer increment, last coordinate fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            if digits[pos] < n {
                digits[pos] += 1;
                break;
            }
            digits[pos] = 1;
        }
    }
}

/// Number of members of `space`.
pub fn count_members(space: &RankSpace) -> Result<usize> {
    let mut count = 0;
    for_each_member(space, |_| count += 1)?;
    Ok(count)
}

/// Lexicographically first member minimizing `objective`; members for which
/// `objective` returns `None` are skipped.
pub fn argmin_over(
    space: &RankSpace,
    mut objective: impl FnMut(&RankVector) -> Option<f64>,
) -> Result<Option<(RankVector, f64)>> {
    let mut best: Option<(RankVector, f64)> = None;
    for_each_member(space, |r| {
        if let Some(v) = objective(r) {
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((r.clone(), v));
            }
        }
    })?;
    Ok(best)
}

/// Least-squares estimator `argmin_r sum_{i != j} (X_ij - mu[r(i)][r(j)])^2`
/// by enumeration.
pub fn lse_brute_force(
    x: &InteractionMatrix,
    model: &ModelSpec,
    space: &RankSpace,
) -> Result<RankVector> {
    check_size(space.n())?;
    check_len(space.n(), x.n())?;
    check_len(space.n(), model.n())?;
    let best = argmin_over(space, |r| {
        let mu = build_mean_matrix(model, r).ok()?;
        x.squared_distance(&mu).ok()
    })?;
    best.map(|(r, _)| r)
        .ok_or_else(|| RankError::Internal("rank space is empty".into()))
}

/// The least-squares objective itself, for reporting.
pub fn lse_objective(x: &InteractionMatrix, model: &ModelSpec, r: &RankVector) -> Result<f64> {
    let mu = build_mean_matrix(model, r)?;
    x.squared_distance(&mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    #[test]
    fn member_count_small_space() {
        let space = RankSpace::new(3, 1).unwrap();
        assert_eq!(count_members(&space).unwrap(), 19);
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let space = RankSpace::new(3, 1).unwrap();
        let mut seen = Vec::new();
        for_each_member(&space, |r| seen.push(r.clone())).unwrap();
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(seen[0].entries(), &[1, 1, 3]);
    }

    #[test]
    fn refuses_large_n() {
        let space = RankSpace::new(7, 1).unwrap();
        assert!(matches!(
            count_members(&space),
            Err(RankError::TooLarge { n: 7, max: 6 })
        ));
    }

    #[test]
    fn noiseless_lse_recovers_truth() {
        let model = ModelSpec::linear(ModelKind::DifferentialComparison, 5, 0.0, 1.0).unwrap();
        let space = RankSpace::new(5, 2).unwrap();
        let truth = RankVector::new(vec![2, 1, 3, 5, 4]).unwrap();
        let x = build_mean_matrix(&model, &truth).unwrap();
        assert_eq!(lse_brute_force(&x, &model, &space).unwrap(), truth);
    }
}
