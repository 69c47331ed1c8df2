//! Mean structures of the pairwise interaction model.
//!
//! Each model maps a rank vector `r` to a mean matrix with entries
//! `mu[r(i)][r(j)]`:
//!
//! | kind | `mu[k][l]` |
//! |------|------------|
//! | differential comparison | `theta_k - theta_l` |
//! | additive collaboration | `theta_k + theta_l` |
//! | Poisson sqrt-linear | `(2 alpha + beta (k + l))^2` |
//!
//! The Poisson model is additive on the square-root scale with
//! `theta_k = alpha + beta k`, and that is how it is stored.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RankError, Result};
use crate::matrix::{MeanMatrix, PairMatrix};
use crate::rank::RankVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "differential", alias = "comparison")]
    DifferentialComparison,
    #[serde(alias = "additive", alias = "collaboration")]
    AdditiveCollaboration,
    #[serde(alias = "poisson")]
    PoissonSqrtLinear,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::DifferentialComparison => "differential",
            ModelKind::AdditiveCollaboration => "additive",
            ModelKind::PoissonSqrtLinear => "poisson",
        }
    }

    /// Whether the observation noise is Poisson rather than sub-Gaussian.
    pub fn is_poisson(&self) -> bool {
        matches!(self, ModelKind::PoissonSqrtLinear)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "differential" | "differential_comparison" | "comparison" => {
                Ok(ModelKind::DifferentialComparison)
            }
            "additive" | "additive_collaboration" | "collaboration" => {
                Ok(ModelKind::AdditiveCollaboration)
            }
            "poisson" | "poisson_sqrt_linear" => Ok(ModelKind::PoissonSqrtLinear),
            other => Err(RankError::input(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Intercept and slope of an ability vector `theta_k = alpha + beta_tilde * k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearAbility {
    pub alpha: f64,
    pub beta_tilde: f64,
}

impl LinearAbility {
    pub fn theta(&self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|k| self.alpha + self.beta_tilde * k as f64)
            .collect()
    }
}

/// A fully specified mean structure for `n` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    kind: ModelKind,
    theta: Vec<f64>,
    linear: Option<LinearAbility>,
}

impl ModelSpec {
    /// Differential comparison model with an arbitrary ability vector.
    pub fn differential(theta: Vec<f64>) -> Result<Self> {
        Self::nonparametric(ModelKind::DifferentialComparison, theta)
    }

    /// Additive collaboration model with an arbitrary ability vector.
    pub fn additive(theta: Vec<f64>) -> Result<Self> {
        Self::nonparametric(ModelKind::AdditiveCollaboration, theta)
    }

    fn nonparametric(kind: ModelKind, theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(RankError::input("ability vector needs at least 2 entries"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(RankError::input("ability vector has non-finite entries"));
        }
        Ok(ModelSpec {
            kind,
            theta,
            linear: None,
        })
    }

    /// Comparison or collaboration model with `theta_k = alpha + beta_tilde k`.
    pub fn linear(kind: ModelKind, n: usize, alpha: f64, beta_tilde: f64) -> Result<Self> {
        if n < 2 {
            return Err(RankError::input("model needs n >= 2"));
        }
        if !alpha.is_finite() || !beta_tilde.is_finite() {
            return Err(RankError::input("alpha and beta_tilde must be finite"));
        }
        let lin = LinearAbility { alpha, beta_tilde };
        if kind.is_poisson() {
            // sqrt(mu) = 2 alpha + beta (k + l) for k + l in [2, 2n]
            let lo = 2.0 * alpha + beta_tilde * 2.0;
            let hi = 2.0 * alpha + beta_tilde * 2.0 * n as f64;
            if lo <= 0.0 || hi <= 0.0 {
                return Err(RankError::input(
                    "Poisson means must be strictly positive: need 2 alpha + beta (k + l) > 0",
                ));
            }
        }
        Ok(ModelSpec {
            kind,
            theta: lin.theta(n),
            linear: Some(lin),
        })
    }

    /// Poisson model with `sqrt(mu[k][l]) = 2 alpha + beta_tilde (k + l)`.
    pub fn poisson_sqrt_linear(n: usize, alpha: f64, beta_tilde: f64) -> Result<Self> {
        Self::linear(ModelKind::PoissonSqrtLinear, n, alpha, beta_tilde)
    }

    /// The Poisson construction with `alpha = beta_tilde n^2`.
    pub fn poisson_lower_bound(n: usize, beta_tilde: f64) -> Result<Self> {
        Self::poisson_sqrt_linear(n, beta_tilde * (n * n) as f64, beta_tilde)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// `theta_1, ..., theta_n` (index `k - 1` holds `theta_k`). For the
    /// Poisson model these are the square-root scale abilities.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn linear_params(&self) -> Option<LinearAbility> {
        self.linear
    }

    pub fn alpha(&self) -> Option<f64> {
        self.linear.map(|l| l.alpha)
    }

    pub fn beta_tilde(&self) -> Option<f64> {
        self.linear.map(|l| l.beta_tilde)
    }

    /// Same structure with a different ability vector (parametric form is
    /// dropped). Used to build deliberately wrong models.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        check_len(self.n(), theta.len())?;
        Ok(ModelSpec {
            kind: self.kind,
            theta,
            linear: None,
        })
    }

    /// `mu[k][l]` for one-based positions.
    #[inline]
    pub fn mean(&self, k: usize, l: usize) -> f64 {
        let (a, b) = (self.theta[k - 1], self.theta[l - 1]);
        match self.kind {
            ModelKind::DifferentialComparison => a - b,
            ModelKind::AdditiveCollaboration => a + b,
            ModelKind::PoissonSqrtLinear => (a + b) * (a + b),
        }
    }

    fn check_rank(&self, r: &RankVector) -> Result<()> {
        check_len(self.n(), r.len())
    }
}

/// Observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// i.i.d. `N(0, sigma^2)`; `sigma = 0` is accepted as the noiseless limit.
    Gaussian { sigma: f64 },
    /// Independent `Poisson(mu)` counts.
    Poisson,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(RankError::input(format!("sigma = {sigma} must be >= 0")));
        }
        Ok(NoiseSpec::Gaussian { sigma })
    }
}

/// Mean matrix `mu[r(i)][r(j)]` for every ordered pair `i != j`.
pub fn build_mean_matrix(model: &ModelSpec, r: &RankVector) -> Result<MeanMatrix> {
    model.check_rank(r)?;
    let pos = r.entries();
    Ok(PairMatrix::from_fn(r.len(), |i, j| {
        model.mean(pos[i], pos[j])
    }))
}

/// `sum_{i != j} (mu[r~(i)][r~(j)] - mu[r(i)][r(j)])^2`, or with square roots
/// of the means for the Poisson model.
pub fn signal_gap(model: &ModelSpec, r: &RankVector, r_tilde: &RankVector) -> Result<f64> {
    let mu = build_mean_matrix(model, r)?;
    let mu_tilde = build_mean_matrix(model, r_tilde)?;
    if model.kind().is_poisson() {
        mu.map(f64::sqrt).squared_distance(&mu_tilde.map(f64::sqrt))
    } else {
        mu.squared_distance(&mu_tilde)
    }
}

/// Closed form of [`signal_gap`] for the linear-ability models.
///
/// With `d = r~ - r`:
/// * differential: `2 n b^2 ||d||^2 - 2 b^2 (sum d)^2`
/// * additive and Poisson sqrt-linear: `b^2 (2 (n - 2) ||d||^2 + 2 (sum d)^2)`
pub fn signal_gap_closed_form(
    model: &ModelSpec,
    r: &RankVector,
    r_tilde: &RankVector,
) -> Result<f64> {
    model.check_rank(r)?;
    model.check_rank(r_tilde)?;
    let beta = model.beta_tilde().ok_or_else(|| {
        RankError::input("closed-form gap needs a linear ability vector theta_k = alpha + beta k")
    })?;
    let n = r.len() as f64;
    let norm_sq = r.squared_distance(r_tilde) as f64;
    let total = (r_tilde.sum() - r.sum()) as f64;
    let b2 = beta * beta;
    Ok(match model.kind() {
        ModelKind::DifferentialComparison => 2.0 * n * b2 * norm_sq - 2.0 * b2 * total * total,
        ModelKind::AdditiveCollaboration | ModelKind::PoissonSqrtLinear => {
            b2 * (2.0 * (n - 2.0) * norm_sq + 2.0 * total * total)
        }
    })
}

/// `signal_gap / (2 n ||r~ - r||^2)`, the largest `beta^2` for which the
/// signal condition holds on this particular pair. `None` when `r~ = r`.
pub fn signal_ratio(
    model: &ModelSpec,
    r: &RankVector,
    r_tilde: &RankVector,
) -> Result<Option<f64>> {
    let dist = r.squared_distance(r_tilde);
    if dist == 0 {
        return Ok(None);
    }
    let gap = signal_gap(model, r, r_tilde)?;
    Ok(Some(gap / (2.0 * r.len() as f64 * dist as f64)))
}

fn check_snr_args(n: usize, sigma: f64) -> Result<()> {
    if n < 2 {
        return Err(RankError::input("SNR needs n >= 2"));
    }
    if !(sigma > 0.0) {
        return Err(RankError::input(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    Ok(())
}

/// Signal-to-noise ratio `n beta^2 / (4 sigma^2)`.
pub fn snr(n: usize, beta: f64, sigma: f64) -> Result<f64> {
    check_snr_args(n, sigma)?;
    Ok(n as f64 * beta * beta / (4.0 * sigma * sigma))
}

/// Inverse of [`snr`]: `beta = 2 sigma sqrt(snr / n)`.
pub fn beta_for_snr(n: usize, snr: f64, sigma: f64) -> Result<f64> {
    check_snr_args(n, sigma)?;
    if !(snr >= 0.0) {
        return Err(RankError::input(format!("snr = {snr} must be >= 0")));
    }
    Ok(2.0 * sigma * (snr / n as f64).sqrt())
}

/// Poisson signal-to-noise ratio `n beta^2`.
pub fn poisson_snr(n: usize, beta: f64) -> f64 {
    n as f64 * beta * beta
}

/// Inverse of [`poisson_snr`].
pub fn poisson_beta_for_snr(n: usize, snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(RankError::input(format!("snr = {snr} must be >= 0")));
    }
    Ok((snr / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[usize]) -> RankVector {
        RankVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mean_matrix_examples() {
        let r = RankVector::identity(3);
        let diff = ModelSpec::differential(vec![1.0, 2.0, 3.0]).unwrap();
        let mu = build_mean_matrix(&diff, &r).unwrap();
        assert_eq!(mu.get(0, 1), -1.0);
        assert_eq!(mu.get(1, 0), 1.0);

        let add = ModelSpec::additive(vec![1.0, 2.0, 3.0]).unwrap();
        let mu = build_mean_matrix(&add, &r).unwrap();
        assert_eq!(mu.get(0, 1), 3.0);
        assert_eq!(mu.get(1, 0), 3.0);

        let poi = ModelSpec::poisson_sqrt_linear(3, 10.0, 1.0).unwrap();
        let mu = build_mean_matrix(&poi, &r).unwrap();
        assert_eq!(mu.get(0, 1), 529.0);
    }

    #[test]
    fn mean_matrix_dimension_mismatch() {
        let diff = ModelSpec::differential(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            build_mean_matrix(&diff, &RankVector::identity(4)),
            Err(RankError::Dimension { .. })
        ));
    }

    #[test]
    fn poisson_means_must_be_positive() {
        assert!(ModelSpec::poisson_sqrt_linear(4, -5.0, 1.0).is_err());
        assert!(ModelSpec::poisson_sqrt_linear(4, 1.0, 0.0).is_ok());
        assert!(ModelSpec::poisson_sqrt_linear(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn gap_examples() {
        let m = ModelSpec::linear(ModelKind::DifferentialComparison, 3, 0.0, 1.0).unwrap();
        let r = RankVector::identity(3);
        let rt = rv(&[2, 2, 3]);
        assert_eq!(signal_gap(&m, &r, &r).unwrap(), 0.0);
        assert!((signal_gap(&m, &r, &rt).unwrap() - 4.0).abs() < 1e-12);
        assert!((signal_gap_closed_form(&m, &r, &rt).unwrap() - 4.0).abs() < 1e-12);

        let m = ModelSpec::linear(ModelKind::DifferentialComparison, 5, 0.3, 2.0).unwrap();
        let r = RankVector::identity(5);
        let rt = rv(&[2, 2, 3, 4, 4]);
        assert!((signal_gap_closed_form(&m, &r, &rt).unwrap() - 80.0).abs() < 1e-9);
        assert!((signal_gap(&m, &r, &rt).unwrap() - 80.0).abs() < 1e-9);

        let p = ModelSpec::poisson_sqrt_linear(4, 3.0, 1.0).unwrap();
        let r = RankVector::identity(4);
        let rt = rv(&[2, 2, 3, 4]);
        assert!((signal_gap_closed_form(&p, &r, &rt).unwrap() - 6.0).abs() < 1e-9);
        assert!((signal_gap(&p, &r, &rt).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_needs_linear_abilities() {
        let m = ModelSpec::differential(vec![0.0, 1.0, 5.0]).unwrap();
        let r = RankVector::identity(3);
        assert!(matches!(
            signal_gap_closed_form(&m, &r, &r),
            Err(RankError::Input(_))
        ));
    }

    #[test]
    fn snr_examples() {
        assert!((snr(100, 0.2, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(snr(100, 0.0, 1.0).unwrap(), 0.0);
        assert!((beta_for_snr(100, 1.0, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(snr(100, 0.2, 0.0).is_err());
        assert!(beta_for_snr(100, 1.0, -1.0).is_err());
    }

    #[test]
    fn snr_round_trip() {
        for &(n, s, sigma) in &[(10, 0.01, 0.5), (200, 3.0, 1.0), (1000, 17.5, 2.5)] {
            let b = beta_for_snr(n, s, sigma).unwrap();
            let back = snr(n, b, sigma).unwrap();
            assert!(((back - s) / s).abs() < 1e-12);
        }
    }
}
