//! Rank vectors, the feasible rank spaces and the `l_q` loss family.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RankError, Result};

/// Latent positions `r(1), ..., r(n)`, each in `1..=n`.
///
/// Ties are allowed; a rank vector does not have to be a permutation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(RankError::input("rank vector must be non-empty"));
        }
        if let Some((i, &v)) = entries.iter().enumerate().find(|(_, &v)| v < 1 || v > n) {
            return Err(RankError::input(format!(
                "entry {} is {v}, outside 1..={n}",
                i + 1
            )));
        }
        Ok(RankVector(entries))
    }

    /// The identity ranking `r(i) = i`.
    pub fn identity(n: usize) -> Self {
        RankVector((1..=n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position of object `i` (zero-based object index, one-based position).
    #[inline]
    pub fn position(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&v| v as i64).sum()
    }

    pub fn sum_sq(&self) -> i64 {
        self.0.iter().map(|&v| (v * v) as i64).sum()
    }

    /// True when every entry is equal (zero sample variance).
    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    /// `||self - other||^2`
    pub fn squared_distance(&self, other: &RankVector) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let d = a as i64 - b as i64;
                d * d
            })
            .sum()
    }
}

impl TryFrom<Vec<usize>> for RankVector {
    type Error = RankError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        RankVector::new(v)
    }
}

impl From<RankVector> for Vec<usize> {
    fn from(r: RankVector) -> Self {
        r.0
    }
}

/// Feasible ranks: the sum of positions may deviate from `n(n+1)/2` by at
/// most `c_n`, and, when `c_n_sq` is set, the sum of squared positions may
/// deviate from `n(n+1)(2n+1)/6` by at most `c_n_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSpace {
    n: usize,
    c_n: u64,
    c_n_sq: Option<u64>,
}

impl RankSpace {
    /// Space with a sum budget only.
    pub fn new(n: usize, c_n: u64) -> Result<Self> {
        Self::build(n, c_n, None)
    }

    /// Space with both the sum and the sum-of-squares budget.
    pub fn with_square_budget(n: usize, c_n: u64, c_n_sq: u64) -> Result<Self> {
        Self::build(n, c_n, Some(c_n_sq))
    }

    /// Sum budget `ceil(n^(1/4))`.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::new(n, default_sum_budget(n))
    }

    /// Sum budget `ceil(n^(1/4))` and square budget `ceil(n^(3/2))`.
    pub fn default_with_squares(n: usize) -> Result<Self> {
        Self::with_square_budget(n, default_sum_budget(n), default_square_budget(n))
    }

    fn build(n: usize, c_n: u64, c_n_sq: Option<u64>) -> Result<Self> {
        if n == 0 {
            return Err(RankError::input("rank space needs n >= 1"));
        }
        if c_n < 1 {
            return Err(RankError::input("sum budget c_n must be at least 1"));
        }
        if let Some(c2) = c_n_sq {
            let cube = (n as u64).pow(3);
            if c2 >= cube {
                return Err(RankError::input(format!(
                    "square budget {c2} must be below n^3 = {cube}"
                )));
            }
        }
        Ok(RankSpace { n, c_n, c_n_sq })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sum_budget(&self) -> u64 {
        self.c_n
    }

    pub fn square_budget(&self) -> Option<u64> {
        self.c_n_sq
    }

    /// The same space without the sum-of-squares constraint.
    pub fn without_square_budget(&self) -> RankSpace {
        RankSpace {
            c_n_sq: None,
            ..*self
        }
    }

    pub fn target_sum(&self) -> i64 {
        let n = self.n as i64;
        n * (n + 1) / 2
    }

    pub fn target_sum_sq(&self) -> i64 {
        let n = self.n as i64;
        n * (n + 1) * (2 * n + 1) / 6
    }

    /// Admissible window `[lo, hi]` for the sum of positions.
    pub fn sum_window(&self) -> (i64, i64) {
        let t = self.target_sum();
        (t - self.c_n as i64, t + self.c_n as i64)
    }

    /// Admissible window for the sum of squared positions, if constrained.
    pub fn square_window(&self) -> Option<(i64, i64)> {
        let t = self.target_sum_sq();
        self.c_n_sq.map(|c| (t - c as i64, t + c as i64))
    }

    pub fn admits(&self, sum: i64, sum_sq: i64) -> bool {
        let (lo, hi) = self.sum_window();
        if sum < lo || sum > hi {
            return false;
        }
        match self.square_window() {
            Some((lo2, hi2)) => (lo2..=hi2).contains(&sum_sq),
            None => true,
        }
    }

    /// Membership test. A vector of the wrong length is not a member.
    pub fn contains(&self, r: &RankVector) -> bool {
        r.len() == self.n && self.admits(r.sum(), r.sum_sq())
    }
}

/// Smallest integer `c` with `c^4 >= n`.
pub fn default_sum_budget(n: usize) -> u64 {
    let n = n as u64;
    let mut c = 1u64;
    while c.pow(4) < n {
        c += 1;
    }
    c
}

/// Smallest integer `c` with `c^2 >= n^3`.
pub fn default_square_budget(n: usize) -> u64 {
    let cube = (n as u64).pow(3);
    let mut c = (cube as f64).sqrt() as u64;
    while c * c < cube {
        c += 1;
    }
    while c > 0 && (c - 1) * (c - 1) >= cube {
        c -= 1;
    }
    c
}

/// `l_q(r_hat, r)`: the normalized Hamming distance for `q = 0`, otherwise
/// `(1/n) sum |r_hat(i) - r(i)|^q`.
pub fn loss(q: f64, r_hat: &RankVector, r: &RankVector) -> Result<f64> {
    if !(0.0..=2.0).contains(&q) {
        return Err(RankError::input(format!(
            "loss order q = {q} is outside [0, 2]"
        )));
    }
    check_len(r.len(), r_hat.len())?;
    let n = r.len() as f64;
    let total: f64 = r_hat
        .entries()
        .iter()
        .zip(r.entries())
        .map(|(&a, &b)| {
            let d = (a as f64 - b as f64).abs();
            if q == 0.0 {
                if d != 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else if d == 0.0 {
                0.0
            } else {
                d.powf(q)
            }
        })
        .sum();
    Ok(total / n)
}
