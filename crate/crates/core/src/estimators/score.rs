use serde::{Deserialize, Serialize};

use crate::error::{check_len, RankError, Result};
use crate::matrix::InteractionMatrix;

/// One score per object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RankError::input("score vector must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RankError::input(format!("score {} is not finite", i + 1)));
        }
        Ok(ScoreVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn shifted(&self, c: f64) -> ScoreVector {
        ScoreVector(self.0.iter().map(|v| v + c).collect())
    }
}

/// Which interaction structure a score aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Comparison,
    Collaboration,
}

impl std::str::FromStr for ScoreKind {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comparison" => Ok(ScoreKind::Comparison),
            "collaboration" => Ok(ScoreKind::Collaboration),
            other => Err(RankError::input(format!(
                "unknown score kind `{other}` (expected comparison or collaboration)"
            ))),
        }
    }
}

fn check_n(x: &InteractionMatrix) -> Result<usize> {
    let n = x.n();
    if n < 3 {
        return Err(RankError::input(format!("scores need n >= 3, got {n}")));
    }
    Ok(n)
}

/// Row/column sums `(sum_{j != i} X_ij, sum_{j != i} X_ji)` for every `i`.
fn margins(x: &InteractionMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n();
    let mut out = vec![0.0; n];
    let mut inc = vec![0.0; n];
    for (i, j, v) in x.iter() {
        out[i] += v;
        inc[j] += v;
    }
    (out, inc)
}

/// Comparison score with known abilities:
/// `S_i = (1/2n) sum_{j != i} (X_ij - X_ji) + (1/n) sum_j theta_j`.
pub fn score_comparison(x: &InteractionMatrix, theta: &[f64]) -> Result<ScoreVector> {
    let n = check_n(x)?;
    check_len(n, theta.len())?;
    let theta_mean = theta.iter().sum::<f64>() / n as f64;
    let (out, inc) = margins(x);
    let scale = 1.0 / (2.0 * n as f64);
    ScoreVector::new(
        out.iter()
            .zip(&inc)
            .map(|(o, i)| scale * (o - i) + theta_mean)
            .collect(),
    )
}

/// Collaboration score:
/// `S_i = (sum_{j != i} (X_ij + X_ji) - (1/(n-1)) sum_{k != l} X_kl) / (2(n-2))`.
pub fn score_collaboration(x: &InteractionMatrix) -> Result<ScoreVector> {
    let n = check_n(x)?;
    let (out, inc) = margins(x);
    let grand = x.sum() / (n - 1) as f64;
    let scale = 1.0 / (2.0 * (n - 2) as f64);
    ScoreVector::new(
        out.iter()
            .zip(&inc)
            .map(|(o, i)| scale * (o + i - grand))
            .collect(),
    )
}

/// Scores that need no knowledge of the abilities:
/// `(1/2n) sum_{j != i} (X_ij - X_ji)` for comparisons and
/// `(1/(2(n-2))) sum_{j != i} (X_ij + X_ji)` for collaborations.
pub fn score_adaptive(x: &InteractionMatrix, kind: ScoreKind) -> Result<ScoreVector> {
    let n = check_n(x)?;
    let (out, inc) = margins(x);
    let values = match kind {
        ScoreKind::Comparison => {
            let scale = 1.0 / (2.0 * n as f64);
            out.iter().zip(&inc).map(|(o, i)| scale * (o - i)).collect()
        }
        ScoreKind::Collaboration => {
            let scale = 1.0 / (2.0 * (n - 2) as f64);
            out.iter().zip(&inc).map(|(o, i)| scale * (o + i)).collect()
        }
    };
    ScoreVector::new(values)
}
