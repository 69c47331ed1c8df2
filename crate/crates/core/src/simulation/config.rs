//! Experiment descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::estimators::BRUTE_FORCE_MAX_N;
use crate::model::{beta_for_snr, poisson_beta_for_snr, poisson_snr, snr, ModelKind, ModelSpec};
use crate::rank::{default_square_budget, default_sum_budget, RankSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Scores with known abilities, matched to `theta` over the sum-budget space.
    FeatureMatchOracleTheta,
    /// Adaptive scores and alternating profile least squares over the
    /// sum-of-squares space.
    ProfileLsAdaptive,
    /// Exhaustive least squares (Gaussian) or maximum likelihood (Poisson).
    BruteForce,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::FeatureMatchOracleTheta => "feature_match_oracle_theta",
            EstimatorKind::ProfileLsAdaptive => "profile_ls_adaptive",
            EstimatorKind::BruteForce => "brute_force",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature_match_oracle_theta" => Ok(EstimatorKind::FeatureMatchOracleTheta),
            "profile_ls_adaptive" => Ok(EstimatorKind::ProfileLsAdaptive),
            "brute_force" => Ok(EstimatorKind::BruteForce),
            other => Err(RankError::input(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueRankPolicy {
    #[default]
    Identity,
    /// A fresh draw from [`random_feasible_rank`](super::generate::random_feasible_rank)
    /// for every replication.
    RandomFeasible,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_q_list() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}

fn default_max_iters() -> usize {
    100
}

/// One replicated Monte Carlo experiment over a grid of signal strengths.
///
/// The ability vector is linear, `theta_k = alpha + beta k`. Grid points are
/// given either as SNR values, from which `beta` is derived, or directly as
/// `beta` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    /// Gaussian noise level; ignored by the Poisson model.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub snr_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    pub estimator: EstimatorKind,
    /// Sum budget; defaults to `ceil(n^(1/4))`.
    #[serde(default)]
    pub c_n: Option<u64>,
    /// Square budget; defaults to `ceil(n^(3/2))` for profile least squares
    /// and to no constraint otherwise.
    #[serde(default)]
    pub c_n_sq: Option<u64>,
    #[serde(default)]
    pub true_rank: TrueRankPolicy,
    /// Ability intercept. Defaults to 0, or to `beta n^2` for the Poisson model.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Fill the `wall_time_ms` column. Off by default so that result tables
    /// are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// A resolved grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub snr: f64,
    pub beta: f64,
}

impl ExperimentConfig {
    /// Checks every field; the first failure names the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(RankError::config(field, reason));
        if self.model.is_poisson() {
            if self.n < 2 {
                return bad("n", format!("must be at least 2, got {}", self.n));
            }
        } else if self.n < 3 {
            return bad("n", format!("must be at least 3, got {}", self.n));
        }
        if !self.model.is_poisson() && (!(self.sigma >= 0.0) || !self.sigma.is_finite()) {
            return bad(
                "sigma",
                format!("must be finite and >= 0, got {}", self.sigma),
            );
        }
        match (&self.snr_grid, &self.beta_grid) {
            (Some(_), Some(_)) => {
                return bad("snr_grid", "give snr_grid or beta_grid, not both".into())
            }
            (None, None) => {
                return bad(
                    "snr_grid",
                    "one of snr_grid or beta_grid is required".into(),
                )
            }
            (Some(g), None) => {
                if g.is_empty() {
                    return bad("snr_grid", "must not be empty".into());
                }
                if let Some(v) = g.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return bad(
                        "snr_grid",
                        format!("values must be positive and finite, got {v}"),
                    );
                }
                if !self.model.is_poisson() && self.sigma == 0.0 {
                    return bad("sigma", "sigma = 0 needs an explicit beta_grid".into());
                }
            }
            (None, Some(g)) => {
                if g.is_empty() {
                    return bad("beta_grid", "must not be empty".into());
                }
                if let Some(v) = g.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return bad(
                        "beta_grid",
                        format!("values must be positive and finite, got {v}"),
                    );
                }
            }
        }
        if self.q_list.is_empty() {
            return bad("q_list", "must not be empty".into());
        }
        if let Some(q) = self.q_list.iter().find(|q| !(0.0..=2.0).contains(*q)) {
            return bad("q_list", format!("loss orders must lie in [0, 2], got {q}"));
        }
        if self.reps < 1 {
            return bad("reps", "must be at least 1".into());
        }
        if self.c_n == Some(0) {
            return bad("c_n", "must be at least 1".into());
        }
        if let Some(c2) = self.c_n_sq {
            let cube = (self.n as u64).pow(3);
            if c2 >= cube {
                return bad("c_n_sq", format!("must be below n^3 = {cube}, got {c2}"));
            }
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return bad("alpha", format!("must be finite, got {a}"));
            }
        }
        match self.estimator {
            EstimatorKind::FeatureMatchOracleTheta | EstimatorKind::ProfileLsAdaptive
                if self.model.is_poisson() =>
            {
                return bad(
                    "estimator",
                    format!(
                        "{} is not defined for the Poisson model; use brute_force",
                        self.estimator
                    ),
                );
            }
            EstimatorKind::BruteForce if self.n > BRUTE_FORCE_MAX_N => {
                return bad(
                    "estimator",
                    format!(
                        "brute_force needs n <= {BRUTE_FORCE_MAX_N}, got n = {}",
                        self.n
                    ),
                );
            }
            EstimatorKind::ProfileLsAdaptive if self.max_iters == 0 => {
                return bad("max_iters", "must be at least 1".into());
            }
            _ => {}
        }
        // Poisson means must stay positive across the whole grid.
        for p in self.grid()? {
            self.model_at(p.beta)?;
        }
        Ok(())
    }

    /// Grid points in configuration order.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let to_cfg = |e: RankError| RankError::config("snr_grid", e.to_string());
        let mut out = Vec::new();
        if let Some(g) = &self.snr_grid {
            for (index, &s) in g.iter().enumerate() {
                let beta = if self.model.is_poisson() {
                    poisson_beta_for_snr(self.n, s).map_err(to_cfg)?
                } else {
                    beta_for_snr(self.n, s, self.sigma).map_err(to_cfg)?
                };
                out.push(GridPoint {
                    index,
                    snr: s,
                    beta,
                });
            }
        } else if let Some(g) = &self.beta_grid {
            for (index, &beta) in g.iter().enumerate() {
                let s = if self.model.is_poisson() {
                    poisson_snr(self.n, beta)
                } else if self.sigma == 0.0 {
                    f64::INFINITY
                } else {
                    snr(self.n, beta, self.sigma).map_err(to_cfg)?
                };
                out.push(GridPoint {
                    index,
                    snr: s,
                    beta,
                });
            }
        }
        Ok(out)
    }

    /// The mean structure at slope `beta`.
    pub fn model_at(&self, beta: f64) -> Result<ModelSpec> {
        let n = self.n;
        let alpha = match (self.alpha, self.model.is_poisson()) {
            (Some(a), _) => a,
            (None, true) => beta * (n * n) as f64,
            (None, false) => 0.0,
        };
        ModelSpec::linear(self.model, n, alpha, beta)
            .map_err(|e| RankError::config("alpha", e.to_string()))
    }

    /// The rank space the estimator searches and true ranks are drawn from.
    pub fn space(&self) -> Result<RankSpace> {
        let c_n = self.c_n.unwrap_or_else(|| default_sum_budget(self.n));
        let c_n_sq = match (self.c_n_sq, self.estimator) {
            (Some(c), _) => Some(c),
            (None, EstimatorKind::ProfileLsAdaptive) => Some(default_square_budget(self.n)),
            (None, _) => None,
        };
        let space = match c_n_sq {
            Some(c2) => RankSpace::with_square_budget(self.n, c_n, c2),
            None => RankSpace::new(self.n, c_n),
        };
        space.map_err(|e| RankError::config("c_n", e.to_string()))
    }

    /// Noise level recorded in result rows: `sigma` for Gaussian models, and
    /// 0 for the Poisson model, whose noise has no free scale.
    pub fn sigma_column(&self) -> f64 {
        if self.model.is_poisson() {
            0.0
        } else {
            self.sigma
        }
    }
}
