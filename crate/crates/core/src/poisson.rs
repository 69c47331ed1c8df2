//! Poisson observation model: likelihood, exhaustive MLE and the
//! Bhattacharyya affinity between two product Poisson laws.

use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, RankError, Result};
use crate::estimators::brute::argmin_over;
use crate::matrix::{MeanMatrix, PairMatrix};
use crate::model::{build_mean_matrix, ModelSpec};
use crate::rank::{RankSpace, RankVector};
use crate::simulation::generate::generate_poisson;

/// Observed counts `X_ij`, one per ordered pair `i != j`.
pub type PoissonCounts = PairMatrix<u64>;

/// `log(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn check_means(mu: &MeanMatrix) -> Result<()> {
    if let Some((i, j, v)) = mu.iter().find(|&(_, _, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(RankError::input(format!(
            "Poisson mean at ({}, {}) is {v}; means must be positive",
            i + 1,
            j + 1
        )));
    }
    Ok(())
}

/// `sum_{i != j} (X_ij log mu_ij - mu_ij - log X_ij!)`.
pub fn poisson_log_likelihood(x: &PoissonCounts, mu: &MeanMatrix) -> Result<f64> {
    check_len(x.n(), mu.n())?;
    check_means(mu)?;
    Ok(x.cells()
        .iter()
        .zip(mu.cells())
        .map(|(&k, &m)| k as f64 * m.ln() - m - ln_factorial(k))
        .sum())
}

/// `LL(mu_tilde) - LL(mu)` without the factorial terms, which cancel.
pub fn log_likelihood_ratio(
    x: &PoissonCounts,
    mu: &MeanMatrix,
    mu_tilde: &MeanMatrix,
) -> Result<f64> {
    check_len(x.n(), mu.n())?;
    check_len(x.n(), mu_tilde.n())?;
    check_means(mu)?;
    check_means(mu_tilde)?;
    Ok(x.cells()
        .iter()
        .zip(mu.cells().iter().zip(mu_tilde.cells()))
        .map(|(&k, (&m, &mt))| k as f64 * (mt / m).ln() - (mt - m))
        .sum())
}

/// Maximum likelihood ranks by enumeration of `space` (lexicographically
/// first maximizer).
pub fn poisson_mle_brute_force(
    x: &PoissonCounts,
    model: &ModelSpec,
    space: &RankSpace,
) -> Result<RankVector> {
    check_len(space.n(), x.n())?;
    check_len(space.n(), model.n())?;
    let mut failure = None;
    // log X! is the same for every candidate, so it is left out of the search
    let best = argmin_over(space, |r| {
        let mu = build_mean_matrix(model, r).ok()?;
        if let Err(e) = check_means(&mu) {
            failure.get_or_insert(e);
            return None;
        }
        let ll: f64 = x
            .cells()
            .iter()
            .zip(mu.cells())
            .map(|(&k, &m)| k as f64 * m.ln() - m)
            .sum();
        Some(-ll)
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| RankError::Internal("rank space is empty".into()))
}

/// `E_mu sqrt(dP_tilde / dP) = exp(-1/2 sum_{i != j} (sqrt(mu~_ij) - sqrt(mu_ij))^2)`.
pub fn bhattacharyya_affinity(mu: &MeanMatrix, mu_tilde: &MeanMatrix) -> Result<f64> {
    check_len(mu.n(), mu_tilde.n())?;
    check_means(mu)?;
    check_means(mu_tilde)?;
    let gap: f64 = mu
        .cells()
        .iter()
        .zip(mu_tilde.cells())
        .map(|(&a, &b)| {
            let d = b.sqrt() - a.sqrt();
            d * d
        })
        .sum();
    Ok((-0.5 * gap).exp())
}

/// `sum_x sqrt(p(x | a) p(x | b))` for one pair of Poisson means, summed
/// term by term.
///
/// Terms are generated by recurrence outward from the largest one, so no
/// term underflows before it is negligible. Summation stops on each side once
/// a term drops below `1e-16` times the running total and lies beyond both
/// modes.
pub fn cell_affinity_series(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(RankError::input("Poisson means must be positive"));
    }
    // term(x) = exp(-(a + b)/2) g^x / x!, g = sqrt(a b)
    let g = (a * b).sqrt();
    let peak = g.floor() as u64;
    let log_peak = peak as f64 * g.ln() - 0.5 * (a + b) - ln_factorial(peak);
    let t_peak = log_peak.exp();
    let mut total = t_peak;

    let upper_mode = a.max(b).floor() as u64;
    let mut t = t_peak;
    let mut x = peak;
    loop {
        t *= g / (x + 1) as f64;
        x += 1;
        total += t;
        if x > upper_mode && t <= 1e-16 * total {
            break;
        }
    }

    let lower_mode = a.min(b).floor() as u64;
    let mut t = t_peak;
    let mut x = peak;
    while x > 0 {
        t *= x as f64 / g;
        x -= 1;
        total += t;
        if x < lower_mode && t <= 1e-16 * total {
            break;
        }
    }
    Ok(total)
}

/// Product of [`cell_affinity_series`] over all cells; an independent route to
/// [`bhattacharyya_affinity`].
pub fn bhattacharyya_affinity_series(mu: &MeanMatrix, mu_tilde: &MeanMatrix) -> Result<f64> {
    check_len(mu.n(), mu_tilde.n())?;
    mu.cells()
        .iter()
        .zip(mu_tilde.cells())
        .try_fold(1.0, |acc, (&a, &b)| Ok(acc * cell_affinity_series(a, b)?))
}

/// Outcome of a one-sided Monte Carlo check of the Chernoff bound
/// `P_r(LL(r~) >= LL(r)) <= affinity(mu(r), mu(r~))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffCheck {
    pub draws: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial standard error at the bound, `sqrt(bound (1 - bound) / draws)`.
    pub standard_error: f64,
}

impl ChernoffCheck {
    /// Frequency within the bound plus three standard errors.
    pub fn holds(&self) -> bool {
        self.frequency <= self.bound + 3.0 * self.standard_error
    }
}

/// Draws `draws` count matrices from `mu(r)` and counts how often the
/// likelihood of `r_tilde` reaches that of `r`.
pub fn chernoff_check(
    model: &ModelSpec,
    r: &RankVector,
    r_tilde: &RankVector,
    draws: usize,
    seed: u64,
) -> Result<ChernoffCheck> {
    if draws == 0 {
        return Err(RankError::input("need at least one draw"));
    }
    let mu = build_mean_matrix(model, r)?;
    let mu_tilde = build_mean_matrix(model, r_tilde)?;
    let bound = bhattacharyya_affinity(&mu, &mu_tilde)?;
    let mut exceedances = 0;
    for d in 0..draws {
        let x = generate_poisson(model, r, crate::simulation::seed::mix(&[seed, d as u64]))?;
        if log_likelihood_ratio(&x, &mu, &mu_tilde)? >= 0.0 {
            exceedances += 1;
        }
    }
    let frequency = exceedances as f64 / draws as f64;
    Ok(ChernoffCheck {
        draws,
        exceedances,
        frequency,
        bound,
        standard_error: (bound * (1.0 - bound) / draws as f64).sqrt(),
    })
}
