//! Square arrays without a diagonal.
//!
//! Every quantity in the ranking model is indexed by ordered pairs `(i, j)`
//! with `i != j`. [`PairMatrix`] stores exactly those `n(n-1)` cells, so there
//! is no diagonal slot that could be read by accident.

use crate::error::{RankError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix<T> {
    n: usize,
    cells: Vec<T>,
}

/// Observed real-valued interactions `X[i][j]`.
pub type InteractionMatrix = PairMatrix<f64>;

/// Mean matrix `mu[r(i)][r(j)]` evaluated for a particular rank vector.
pub type MeanMatrix = PairMatrix<f64>;

impl<T: Copy> PairMatrix<T> {
    /// Builds a matrix by evaluating `f(i, j)` on every off-diagonal pair.
    /// Indices are zero-based.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(n * n.saturating_sub(1));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cells.push(f(i, j));
                }
            }
        }
        PairMatrix { n, cells }
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self::from_fn(n, |_, _| value)
    }

    /// Builds from a dense row-major `n x n` buffer; the diagonal entries of
    /// `dense` are ignored.
    pub fn from_dense(n: usize, dense: &[T]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(RankError::Dimension {
                expected: n * n,
                got: dense.len(),
            });
        }
        Ok(Self::from_fn(n, |i, j| dense[i * n + j]))
    }

    /// Builds from cells listed in row-major order with the diagonal skipped.
    pub fn from_cells(n: usize, cells: Vec<T>) -> Result<Self> {
        let expected = n * n.saturating_sub(1);
        if cells.len() != expected {
            return Err(RankError::Dimension {
                expected,
                got: cells.len(),
            });
        }
        Ok(PairMatrix { n, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        assert!(i != j, "diagonal cell ({i}, {i}) is masked");
        debug_assert!(i < self.n && j < self.n);
        i * (self.n - 1) + if j < i { j } else { j - 1 }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.cells[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.offset(i, j);
        self.cells[k] = value;
    }

    /// Off-diagonal cells in row-major order.
    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    /// Iterates `(i, j, value)` over off-diagonal pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .zip(self.cells.iter().copied())
            .map(|((i, j), v)| (i, j, v))
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> PairMatrix<U> {
        PairMatrix {
            n: self.n,
            cells: self.cells.iter().copied().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }
}

impl PairMatrix<f64> {
    /// Combines two matrices cell by cell.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n != other.n {
            return Err(RankError::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(PairMatrix {
            n: self.n,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.cells.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Sum of squared cell differences, `sum_{i != j} (a_ij - b_ij)^2`.
    pub fn squared_distance(&self, other: &Self) -> Result<f64> {
        if self.n != other.n {
            return Err(RankError::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout_skips_diagonal() {
        let m = PairMatrix::from_fn(3, |i, j| (10 * i + j) as f64);
        assert_eq!(m.cells(), &[1.0, 2.0, 10.0, 12.0, 20.0, 21.0]);
        assert_eq!(m.get(2, 1), 21.0);
        let listed: Vec<_> = m.iter().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(listed, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    #[should_panic(expected = "masked")]
    fn diagonal_is_unreadable() {
        let m = PairMatrix::filled(3, 0.0);
        m.get(1, 1);
    }

    #[test]
    fn dense_round_trip_drops_diagonal() {
        let dense = [9.0, 1.0, 2.0, 3.0, 9.0, 4.0, 5.0, 6.0, 9.0];
        let m = PairMatrix::from_dense(3, &dense).unwrap();
        assert_eq!(m.cells(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.transpose().get(0, 1), 3.0);
        assert!(PairMatrix::from_dense(3, &dense[..8]).is_err());
    }
}
