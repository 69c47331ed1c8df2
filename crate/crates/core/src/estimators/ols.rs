//! Least-squares fit of scores on positions, and the profile objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, RankError, Result};
use crate::estimators::score::ScoreVector;
use crate::rank::RankVector;

/// Intercept and slope of the regression `S_i ~ a + b r(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub a_hat: f64,
    pub b_hat: f64,
}

fn degenerate(r: &RankVector) -> RankError {
    RankError::Degenerate(format!(
        "rank vector is constant (all entries {}); slope is not identifiable",
        r.position(0)
    ))
}

/// Closed-form simple regression of `s` on the positions in `r`.
pub fn ols_fit(s: &ScoreVector, r: &RankVector) -> Result<OlsFit> {
    check_len(r.len(), s.len())?;
    if r.is_constant() {
        return Err(degenerate(r));
    }
    let n = r.len() as f64;
    let x = r.as_f64();
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_s = s.values().iter().sum::<f64>() / n;
    // centered sums are the numerically stable form of
    // (mean(S r) - mean(r) mean(S)) / (mean(r^2) - mean(r)^2)
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &si) in x.iter().zip(s.values()) {
        sxy += (xi - mean_x) * (si - mean_s);
        sxx += (xi - mean_x) * (xi - mean_x);
    }
    let b_hat = sxy / sxx;
    Ok(OlsFit {
        a_hat: mean_s - b_hat * mean_x,
        b_hat,
    })
}

/// `PL(r) = min_{a,b} sum_i (S_i - a - b r(i))^2`.
pub fn profile_ls_objective(s: &ScoreVector, r: &RankVector) -> Result<f64> {
    let fit = ols_fit(s, r)?;
    Ok(residual_sum_of_squares(s, r, fit))
}

pub(crate) fn residual_sum_of_squares(s: &ScoreVector, r: &RankVector, fit: OlsFit) -> f64 {
    s.values()
        .iter()
        .zip(r.entries())
        .map(|(&si, &k)| {
            let e = si - fit.a_hat - fit.b_hat * k as f64;
            e * e
        })
        .sum()
}

/// Orthogonal projector onto `span{1, r}`:
/// `H = (1/n) 1 1^T + P r r^T P / ||P r||^2` with `P = I - (1/n) 1 1^T`.
pub fn hat_matrix(r: &RankVector) -> Result<DMatrix<f64>> {
    if r.is_constant() {
        return Err(degenerate(r));
    }
    let n = r.len();
    let mean = r.sum() as f64 / n as f64;
    let centered = DVector::from_iterator(n, r.entries().iter().map(|&k| k as f64 - mean));
    let norm_sq = centered.norm_squared();
    let mut h = DMatrix::from_element(n, n, 1.0 / n as f64);
    h += (&centered * centered.transpose()) / norm_sq;
    Ok(h)
}

/// `||(I - H_r) S||^2`, the profile objective computed through the projector.
pub fn profile_ls_objective_via_hat(s: &ScoreVector, r: &RankVector) -> Result<f64> {
    check_len(r.len(), s.len())?;
    let h = hat_matrix(r)?;
    let sv = DVector::from_column_slice(s.values());
    let resid = &sv - &h * &sv;
    Ok(resid.norm_squared())
}
