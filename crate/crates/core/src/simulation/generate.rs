//! Seeded synthetic data: Gaussian and Poisson interaction matrices and
//! random feasible ranks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{RankError, Result};
use crate::matrix::{InteractionMatrix, PairMatrix};
use crate::model::{build_mean_matrix, signal_ratio, ModelSpec};
use crate::poisson::PoissonCounts;
use crate::rank::{RankSpace, RankVector};
use crate::simulation::seed::mix;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `X = mu(r) + sigma Z` with `Z` i.i.d. standard normal, drawn cell by cell
/// in row-major order. `sigma = 0` returns the mean matrix exactly.
pub fn generate_gaussian(
    model: &ModelSpec,
    r: &RankVector,
    sigma: f64,
    seed: u64,
) -> Result<InteractionMatrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(RankError::input(format!("sigma = {sigma} must be >= 0")));
    }
    if model.kind().is_poisson() {
        return Err(RankError::input(
            "Gaussian noise requested for the Poisson model",
        ));
    }
    let mu = build_mean_matrix(model, r)?;
    if sigma == 0.0 {
        return Ok(mu);
    }
    let mut rng = rng_from_seed(seed);
    Ok(mu.map(|m| {
        let z: f64 = StandardNormal.sample(&mut rng);
        m + sigma * z
    }))
}

/// Independent `Poisson(mu[r(i)][r(j)])` counts.
pub fn generate_poisson(model: &ModelSpec, r: &RankVector, seed: u64) -> Result<PoissonCounts> {
    if !model.kind().is_poisson() {
        return Err(RankError::input("Poisson counts need the Poisson model"));
    }
    let mu = build_mean_matrix(model, r)?;
    let mut rng = rng_from_seed(seed);
    let mut cells = Vec::with_capacity(mu.cells().len());
    for &m in mu.cells() {
        let dist =
            Poisson::new(m).map_err(|e| RankError::input(format!("Poisson mean {m}: {e}")))?;
        let k: f64 = dist.sample(&mut rng);
        cells.push(k as u64);
    }
    PairMatrix::from_cells(mu.n(), cells)
}

/// A uniformly shuffled permutation followed by `steps` proposed `+-1`
/// moves of single entries, each kept only if the result stays in `space`.
pub fn random_feasible_rank(space: &RankSpace, steps: usize, seed: u64) -> RankVector {
    let n = space.n();
    let mut rng = rng_from_seed(seed);
    let mut r: Vec<usize> = (1..=n).collect();
    r.shuffle(&mut rng);
    let (lo, hi) = space.sum_window();
    let square = space.square_window();
    let mut sum: i64 = r.iter().map(|&k| k as i64).sum();
    let mut sum_sq: i64 = r.iter().map(|&k| (k * k) as i64).sum();
    for _ in 0..steps {
        let i = rng.random_range(0..n);
        let up = rng.random_bool(0.5);
        let old = r[i];
        let new = if up { old + 1 } else { old.wrapping_sub(1) };
        if new < 1 || new > n {
            continue;
        }
        let s2 = sum + new as i64 - old as i64;
        let q2 = sum_sq + (new * new) as i64 - (old * old) as i64;
        let ok = (lo..=hi).contains(&s2) && square.is_none_or(|(a, b)| (a..=b).contains(&q2));
        if ok {
            r[i] = new;
            sum = s2;
            sum_sq = q2;
        }
    }
    RankVector::new(r).expect("moves keep entries in 1..=n")
}

/// Smallest `signal_gap / (2 n ||r~ - r||^2)` over `pairs` random pairs of
/// feasible ranks: an empirical `beta^2` for ability vectors without a
/// parametric form.
pub fn estimate_beta_sq(
    model: &ModelSpec,
    space: &RankSpace,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    let steps = space.n();
    for p in 0..pairs {
        let r = random_feasible_rank(space, steps, mix(&[seed, p as u64, 0]));
        let rt = random_feasible_rank(space, steps, mix(&[seed, p as u64, 1]));
        if let Some(ratio) = signal_ratio(model, &r, &rt)? {
            best = best.min(ratio);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(RankError::input("no distinct rank pairs were drawn"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    #[test]
    fn noiseless_shortcut() {
        let m = ModelSpec::linear(ModelKind::DifferentialComparison, 5, 0.0, 1.0).unwrap();
        let r = RankVector::identity(5);
        let x = generate_gaussian(&m, &r, 0.0, 1).unwrap();
        assert_eq!(x, build_mean_matrix(&m, &r).unwrap());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let m = ModelSpec::linear(ModelKind::AdditiveCollaboration, 6, 1.0, 0.5).unwrap();
        let r = RankVector::identity(6);
        let a = generate_gaussian(&m, &r, 1.0, 42).unwrap();
        let b = generate_gaussian(&m, &r, 1.0, 42).unwrap();
        let c = generate_gaussian(&m, &r, 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);

        let p = ModelSpec::poisson_lower_bound(4, 0.3).unwrap();
        let r = RankVector::identity(4);
        assert_eq!(
            generate_poisson(&p, &r, 9).unwrap(),
            generate_poisson(&p, &r, 9).unwrap()
        );
    }

    #[test]
    fn gaussian_noise_variance() {
        let n = 200;
        let sigma = 1.7;
        let m = ModelSpec::linear(ModelKind::DifferentialComparison, n, 0.0, 0.01).unwrap();
        let r = RankVector::identity(n);
        let x = generate_gaussian(&m, &r, sigma, 5).unwrap();
        let mu = build_mean_matrix(&m, &r).unwrap();
        let z = x.zip_with(&mu, |a, b| a - b).unwrap();
        let k = z.cells().len() as f64;
        let mean = z.sum() / k;
        let var = z.cells().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn poisson_cell_mean() {
        let p = ModelSpec::poisson_sqrt_linear(3, 1.0, 0.5).unwrap();
        let r = RankVector::identity(3);
        let mu = build_mean_matrix(&p, &r).unwrap().get(0, 1);
        let draws = 4000;
        let total: u64 = (0..draws)
            .map(|d| generate_poisson(&p, &r, d).unwrap().get(0, 1))
            .sum();
        let mean = total as f64 / draws as f64;
        let se = (mu / draws as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se, "mean {mean} vs {mu}");
    }

    #[test]
    fn random_ranks_are_feasible() {
        let space = RankSpace::default_with_squares(10).unwrap();
        let mut ties = 0;
        for s in 0..1000 {
            let r = random_feasible_rank(&space, 10, s);
            assert!(space.contains(&r));
            let mut v = r.into_inner();
            v.sort_unstable();
            if v.windows(2).any(|w| w[0] == w[1]) {
                ties += 1;
            }
        }
        assert!(ties >= 100, "only {ties} draws had ties");
        let perm = random_feasible_rank(&space, 0, 3);
        let mut v = perm.into_inner();
        v.sort_unstable();
        assert_eq!(v, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn beta_estimate_for_linear_model() {
        let m = ModelSpec::linear(ModelKind::DifferentialComparison, 20, 0.0, 0.5).unwrap();
        let space = RankSpace::default_for(20).unwrap();
        let b2 = estimate_beta_sq(&m, &space, 200, 1).unwrap();
        // ratio is b^2 (1 - (sum d)^2 / (n ||d||^2)) and |sum d| <= 2 c_n
        assert!(b2 <= 0.25 + 1e-12);
        assert!(b2 >= 0.25 * (1.0 - 2.0 * 3.0 / 20.0));
    }
}
