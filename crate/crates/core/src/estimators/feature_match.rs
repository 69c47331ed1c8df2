//! Constrained feature matching.
//!
//! Given scores `S_i` and abilities `theta_k`, find
//!
//! ```text
//! argmin_{r in space} sum_i (S_i - theta_{r(i)})^2
//! ```
//!
//! The objective is separable, so the only coupling between coordinates is the
//! budget on `sum r(i)` (and on `sum r(i)^2` for the tighter space). The solver
//! is exact:
//!
//! 1. Every coordinate takes its unconstrained minimizer `u_i` (smallest `k` on
//!    ties). If `u` is feasible we are done.
//! 2. Otherwise the sum budget is repaired. When every per-coordinate cost is
//!    discretely convex in `k` a marginal-cost greedy is optimal. When the costs
//!    are only unimodal (monotone `theta`) an optimal repair moves every
//!    coordinate in the same direction, so a dynamic program over a window of
//!    width `|sum u - target| + c_n` suffices. In general the dynamic program runs
//!    over all prefix sums.
//! 3. If the sum-of-squares budget is present and the sum-only optimum violates
//!    it, a cost-bounded search over `(sum, sum of squares)` prefix states
//!    finishes the job. Permutations belong to every rank space, so a locally
//!    improved permutation gives the initial bound.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{check_len, RankError, Result};
use crate::estimators::score::ScoreVector;
use crate::rank::{RankSpace, RankVector};

/// Work limit for the two-budget search, in examined transitions.
const MAX_SEARCH_WORK: usize = 50_000_000;
/// Smaller limit used where a near-optimal vector is acceptable.
const LENIENT_SEARCH_WORK: usize = 2_000_000;

/// `sum_i (S_i - theta_{r(i)})^2`, summed in object order.
pub fn matching_objective(s: &ScoreVector, theta: &[f64], r: &RankVector) -> f64 {
    s.values()
        .iter()
        .zip(r.entries())
        .map(|(&si, &k)| {
            let d = si - theta[k - 1];
            d * d
        })
        .sum()
}

/// Exact minimizer of `sum_i (S_i - theta_{r(i)})^2` over `space`.
pub fn feature_match(s: &ScoreVector, theta: &[f64], space: &RankSpace) -> Result<RankVector> {
    let n = space.n();
    check_len(n, s.len())?;
    check_len(n, theta.len())?;
    if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
        return Err(RankError::input(format!("theta_{} is not finite", i + 1)));
    }
    let costs = CostTable::new(s.values(), theta);
    let shape = if costs.all_rows_convex() {
        Shape::Convex
    } else if is_monotone(theta) {
        Shape::Unimodal
    } else {
        Shape::General
    };
    solve(&costs, shape, space, true)
}

/// Feature matching against the linear surrogate `theta_k = a + b k`.
///
/// The surrogate makes every per-coordinate cost convex, so the repair step
/// is always the greedy one regardless of rounding in the cost table. When
/// both budgets bind and the exact search exceeds its work limit, the best
/// feasible vector found so far is returned instead of an error.
pub fn feature_match_linear(
    s: &ScoreVector,
    intercept: f64,
    slope: f64,
    space: &RankSpace,
) -> Result<RankVector> {
    let n = space.n();
    check_len(n, s.len())?;
    if !intercept.is_finite() || !slope.is_finite() {
        return Err(RankError::input(
            "surrogate intercept and slope must be finite",
        ));
    }
    let theta: Vec<f64> = (1..=n).map(|k| intercept + slope * k as f64).collect();
    let costs = CostTable::new(s.values(), &theta);
    solve(&costs, Shape::Convex, space, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Convex,
    Unimodal,
    General,
}

fn is_monotone(theta: &[f64]) -> bool {
    theta.windows(2).all(|w| w[0] <= w[1]) || theta.windows(2).all(|w| w[0] >= w[1])
}

/// Row-major `n x n` table, `cost[i][k - 1] = (S_i - theta_k)^2`.
struct CostTable {
    n: usize,
    cells: Vec<f64>,
}

impl CostTable {
    fn new(s: &[f64], theta: &[f64]) -> Self {
        let n = s.len();
        let mut cells = Vec::with_capacity(n * n);
        for &si in s {
            cells.extend(theta.iter().map(|&t| (si - t) * (si - t)));
        }
        CostTable { n, cells }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.cells[i * self.n..(i + 1) * self.n]
    }

    /// Cost of giving object `i` the one-based position `k`.
    #[inline]
    fn at(&self, i: usize, k: usize) -> f64 {
        self.cells[i * self.n + k - 1]
    }

    /// The table of `c_i(k) + mu k^2`.
    fn penalized(&self, mu: f64) -> CostTable {
        let n = self.n;
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let k = (j % n + 1) as f64;
                c + mu * k * k
            })
            .collect();
        CostTable { n, cells }
    }

    /// Convexity up to rounding in the table entries; enough for heuristics.
    fn nearly_convex(&self) -> bool {
        let tol = 1e-12 * self.cells.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        (0..self.n).all(|i| {
            self.row(i)
                .windows(3)
                .all(|w| (w[2] - w[1]) - (w[1] - w[0]) >= -tol)
        })
    }

    fn all_rows_convex(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .windows(3)
                .all(|w| (w[2] - w[1]) >= (w[1] - w[0]))
        })
    }

    /// One-based argmin of each row, smallest position on ties.
    fn row_minimizers(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (k, &c) in row.iter().enumerate().skip(1) {
                    if c < row[best] {
                        best = k;
                    }
                }
                best + 1
            })
            .collect()
    }
}

fn solve(costs: &CostTable, shape: Shape, space: &RankSpace, strict: bool) -> Result<RankVector> {
    let n = costs.n;
    let (lo, hi) = space.sum_window();

    let by_sum = sum_optimal(costs, shape, lo, hi)?;
    let candidate = RankVector::new(by_sum).map_err(|e| RankError::Internal(e.to_string()))?;
    if space.contains(&candidate) {
        return Ok(candidate);
    }
    if space.square_budget().is_none() {
        return Err(RankError::Internal(
            "sum repair produced an infeasible rank vector".into(),
        ));
    }
    let limit = if strict {
        MAX_SEARCH_WORK
    } else {
        LENIENT_SEARCH_WORK
    };
    let found = two_budget_search(costs, space, limit);
    if strict && !found.exact {
        return Err(RankError::Internal(format!(
            "two-budget search exceeded its work limit at n = {n}"
        )));
    }
    RankVector::new(found.rank).map_err(|e| RankError::Internal(e.to_string()))
}

/// Exact minimizer under the sum window alone.
fn sum_optimal(costs: &CostTable, shape: Shape, lo: i64, hi: i64) -> Result<Vec<usize>> {
    let n = costs.n;
    let u = costs.row_minimizers();
    let sum_u: i64 = u.iter().map(|&k| k as i64).sum();
    if (lo..=hi).contains(&sum_u) {
        return Ok(u);
    }
    match shape {
        Shape::Convex => Ok(greedy_repair(costs, u, sum_u, lo, hi)),
        Shape::Unimodal => {
            let (kmin, kmax) = one_sided_ranges(&u, sum_u, lo, hi, n);
            sum_dp(costs, &kmin, &kmax, lo, hi)
        }
        Shape::General => sum_dp(costs, &vec![1; n], &vec![n; n], lo, hi),
    }
}

/// Per-coordinate position ranges when every coordinate may only move toward
/// the violated side of the sum window.
fn one_sided_ranges(
    u: &[usize],
    sum_u: i64,
    lo: i64,
    hi: i64,
    n: usize,
) -> (Vec<usize>, Vec<usize>) {
    if sum_u > hi {
        let reach = (sum_u - lo) as usize;
        let kmin = u.iter().map(|&k| k.saturating_sub(reach).max(1)).collect();
        (kmin, u.to_vec())
    } else {
        let reach = (hi - sum_u) as usize;
        let kmax = u.iter().map(|&k| (k + reach).min(n)).collect();
        (u.to_vec(), kmax)
    }
}

#[derive(PartialEq)]
struct Step {
    marginal: f64,
    object: usize,
}

impl Eq for Step {}

impl Ord for Step {
    // BinaryHeap is a max-heap; invert so the cheapest step pops first and
    // ties go to the smallest object index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .marginal
            .total_cmp(&self.marginal)
            .then_with(|| other.object.cmp(&self.object))
    }
}

impl PartialOrd for Step {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unit moves in order of marginal cost until the sum enters the window.
/// Optimal when each row is convex in the position.
fn greedy_repair(costs: &CostTable, mut r: Vec<usize>, sum_u: i64, lo: i64, hi: i64) -> Vec<usize> {
    let n = costs.n;
    let down = sum_u > hi;
    let mut remaining = if down { sum_u - hi } else { lo - sum_u };
    let next = |k: usize| -> Option<usize> {
        if down {
            (k > 1).then(|| k - 1)
        } else {
            (k < n).then(|| k + 1)
        }
    };
    let mut heap = BinaryHeap::with_capacity(n);
    for (i, &k) in r.iter().enumerate() {
        if let Some(k2) = next(k) {
            heap.push(Step {
                marginal: costs.at(i, k2) - costs.at(i, k),
                object: i,
            });
        }
    }
    while remaining > 0 {
        let Some(Step { object: i, .. }) = heap.pop() else {
            break;
        };
        let k2 = next(r[i]).expect("heap only holds movable objects");
        r[i] = k2;
        remaining -= 1;
        if let Some(k3) = next(k2) {
            heap.push(Step {
                marginal: costs.at(i, k3) - costs.at(i, k2),
                object: i,
            });
        }
    }
    r
}

/// Exact dynamic program over prefix sums with `r(i)` restricted to
/// `kmin[i]..=kmax[i]` and the final sum restricted to `[lo, hi]`.
///
/// Values are computed from the last coordinate backwards, then the solution
/// is read forwards taking the smallest optimal position at each step, which
/// makes the result the lexicographically smallest optimum of the table.
fn sum_dp(
    costs: &CostTable,
    kmin: &[usize],
    kmax: &[usize],
    lo: i64,
    hi: i64,
) -> Result<Vec<usize>> {
    let n = costs.n;
    // prefix ranges: prefix sum before coordinate m lies in [pmin[m], pmax[m]]
    let mut suffix_min = vec![0i64; n + 1];
    let mut suffix_max = vec![0i64; n + 1];
    for m in (0..n).rev() {
        suffix_min[m] = suffix_min[m + 1] + kmin[m] as i64;
        suffix_max[m] = suffix_max[m + 1] + kmax[m] as i64;
    }
    let mut pmin = vec![0i64; n + 1];
    let mut pmax = vec![0i64; n + 1];
    for m in 0..=n {
        let reach_min = suffix_min[0] - suffix_min[m];
        let reach_max = suffix_max[0] - suffix_max[m];
        pmin[m] = reach_min.max(lo - suffix_max[m]);
        pmax[m] = reach_max.min(hi - suffix_min[m]);
    }
    if (0..=n).any(|m| pmin[m] > pmax[m]) {
        return Err(RankError::Internal("sum window unreachable".into()));
    }

    // value[m][p - pmin[m]] = best cost of coordinates m.. given prefix sum p
    let mut value: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    value.resize_with(n + 1, Vec::new);
    value[n] = vec![0.0; (pmax[n] - pmin[n] + 1) as usize];
    for m in (0..n).rev() {
        let width = (pmax[m] - pmin[m] + 1) as usize;
        let mut cur = vec![f64::INFINITY; width];
        let next = &value[m + 1];
        for (off, slot) in cur.iter_mut().enumerate() {
            let p = pmin[m] + off as i64;
            for k in kmin[m]..=kmax[m] {
                let q = p + k as i64;
                if q < pmin[m + 1] || q > pmax[m + 1] {
                    continue;
                }
                let v = costs.at(m, k) + next[(q - pmin[m + 1]) as usize];
                if v < *slot {
                    *slot = v;
                }
            }
        }
        value[m] = cur;
    }

    let mut r = Vec::with_capacity(n);
    let mut p = 0i64;
    for m in 0..n {
        let target = value[m][(p - pmin[m]) as usize];
        if !target.is_finite() {
            return Err(RankError::Internal("no feasible completion".into()));
        }
        let next = &value[m + 1];
        let k = (kmin[m]..=kmax[m])
            .find(|&k| {
                let q = p + k as i64;
                q >= pmin[m + 1]
                    && q <= pmax[m + 1]
                    && costs.at(m, k) + next[(q - pmin[m + 1]) as usize] == target
            })
            .ok_or_else(|| RankError::Internal("dynamic program lost its optimum".into()))?;
        r.push(k);
        p += k as i64;
    }
    Ok(r)
}

/// Admissible `(sum, sum of squares)` windows.
#[derive(Clone, Copy)]
struct Windows {
    lo: i64,
    hi: i64,
    lo2: i64,
    hi2: i64,
}

impl Windows {
    fn of(space: &RankSpace) -> Self {
        let (lo, hi) = space.sum_window();
        let (lo2, hi2) = space
            .square_window()
            .expect("caller checked the square budget");
        Windows { lo, hi, lo2, hi2 }
    }

    fn admits(&self, s: i64, q: i64) -> bool {
        (self.lo..=self.hi).contains(&s) && (self.lo2..=self.hi2).contains(&q)
    }

    /// Distance to the windows, squares scaled down by `n`.
    fn violation(&self, s: i64, q: i64, n: usize) -> f64 {
        let d1 = (self.lo - s).max(s - self.hi).max(0) as f64;
        let d2 = (self.lo2 - q).max(q - self.hi2).max(0) as f64;
        d1 + d2 / n as f64
    }
}

fn sums(r: &[usize]) -> (i64, i64) {
    r.iter()
        .fold((0, 0), |(s, q), &k| (s + k as i64, q + (k * k) as i64))
}

fn total_cost(costs: &CostTable, r: &[usize]) -> f64 {
    r.iter().enumerate().map(|(i, &k)| costs.at(i, k)).sum()
}

/// `max_{t in [lo, hi]} m t`.
fn support(m: f64, lo: i64, hi: i64) -> f64 {
    if m >= 0.0 {
        m * hi as f64
    } else {
        m * lo as f64
    }
}

/// The Lagrangian of the two budgets,
/// `sum_i min_k (c_i(k) + lambda k + mu k^2) - max_T lambda T - max_Q mu Q`,
/// a lower bound on the constrained optimum for every `(lambda, mu)`.
struct Dual<'a> {
    costs: &'a CostTable,
    w: Windows,
    /// Smallest second difference of each cost row.
    curvature: Vec<f64>,
}

struct Relaxed {
    value: f64,
    arg: Vec<usize>,
    sum: i64,
}

impl<'a> Dual<'a> {
    fn new(costs: &'a CostTable, w: Windows) -> Self {
        let curvature = (0..costs.n)
            .map(|i| {
                costs
                    .row(i)
                    .windows(3)
                    .map(|c| c[2] - 2.0 * c[1] + c[0])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Dual {
            costs,
            w,
            curvature,
        }
    }

    fn relax(&self, lambda: f64, mu: f64) -> Relaxed {
        let n = self.costs.n;
        let p = |i: usize, k: usize| {
            let kf = k as f64;
            self.costs.at(i, k) + lambda * kf + mu * kf * kf
        };
        let mut value = 0.0;
        let mut arg = Vec::with_capacity(n);
        for i in 0..n {
            let k = if self.curvature[i] + 2.0 * mu >= 0.0 {
                // convex row: first position where the forward difference
                // stops being negative
                let (mut lo, mut hi) = (1, n);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if p(i, mid + 1) - p(i, mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                lo
            } else {
                let mut best = 1;
                for k in 2..=n {
                    if p(i, k) < p(i, best) {
                        best = k;
                    }
                }
                best
            };
            value += p(i, k);
            arg.push(k);
        }
        value -= support(lambda, self.w.lo, self.w.hi) + support(mu, self.w.lo2, self.w.hi2);
        let sum = arg.iter().map(|&k| k as i64).sum();
        Relaxed { value, arg, sum }
    }

    /// Best `lambda` for a fixed `mu`. The relaxed sum is nonincreasing in
    /// `lambda`, and the maximum sits where it crosses the sum window.
    fn best_lambda(&self, mu: f64) -> (f64, Relaxed) {
        let at_zero = self.relax(0.0, mu);
        let (lo, hi) = (self.w.lo, self.w.hi);
        if (lo..=hi).contains(&at_zero.sum) {
            return (0.0, at_zero);
        }
        // sign: +1 when the sum is too large and lambda must grow
        let sign = if at_zero.sum > hi { 1.0 } else { -1.0 };
        let inside = |r: &Relaxed| if sign > 0.0 { r.sum <= hi } else { r.sum >= lo };
        let (mut a, mut b) = (0.0, 1.0);
        let mut rb = self.relax(sign * b, mu);
        let mut guard = 0;
        while !inside(&rb) && guard < 200 {
            a = b;
            b *= 2.0;
            rb = self.relax(sign * b, mu);
            guard += 1;
        }
        let mut ra = self.relax(sign * a, mu);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let rm = self.relax(sign * m, mu);
            if inside(&rm) {
                b = m;
                rb = rm;
            } else {
                a = m;
                ra = rm;
            }
        }
        if ra.value > rb.value {
            (sign * a, ra)
        } else {
            (sign * b, rb)
        }
    }

    /// Maximizes the dual: golden-section search over `mu` on the concave
    /// profile `max_lambda L(lambda, mu)`. Returns `(lambda, mu, relaxation)`.
    fn maximize(&self) -> (f64, f64, Relaxed) {
        let phi = |mu: f64| {
            let (l, r) = self.best_lambda(mu);
            (r.value, l, r)
        };
        let n = self.costs.n as f64;
        let scale = self
            .curvature
            .iter()
            .filter(|c| c.is_finite())
            .map(|c| c.abs())
            .fold(0.0, f64::max)
            .max(
                1e-9 * (1.0 + self.costs.cells.iter().fold(0.0f64, |m, c| m.max(c.abs())))
                    / (n * n),
            );
        let mut best = phi(0.0);
        let mut best_mu = 0.0;
        // bracket the maximizer
        let mut bracket = (-scale, scale);
        for dir in [1.0, -1.0] {
            let mut step = scale;
            let mut prev = 0.0;
            let mut cur = phi(dir * step);
            if cur.0 <= best.0 {
                continue;
            }
            let mut last = 0.0;
            for _ in 0..200 {
                prev = step;
                step *= 2.0;
                let next = phi(dir * step);
                if next.0 <= cur.0 {
                    break;
                }
                last = prev;
                cur = next;
            }
            bracket = if dir > 0.0 {
                (last, step)
            } else {
                (-step, -last)
            };
            let _ = prev;
            break;
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = bracket;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = phi(x1);
        let mut f2 = phi(x2);
        for _ in 0..60 {
            if f1.0 >= f2.0 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = phi(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = phi(x2);
            }
            if b - a <= 1e-15 * (a.abs() + b.abs()) {
                break;
            }
        }
        for (mu, f) in [(x1, f1), (x2, f2)] {
            if f.0 > best.0 {
                best = f;
                best_mu = mu;
            }
        }
        (best.1, best_mu, best.2)
    }
}

/// Greedy unit moves toward the windows, cheapest per unit of violation
/// removed. `None` if it gets stuck.
fn repair(costs: &CostTable, w: &Windows, mut r: Vec<usize>) -> Option<Vec<usize>> {
    let n = costs.n;
    let (mut s, mut q) = sums(&r);
    while !w.admits(s, q) {
        let now = w.violation(s, q, n);
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for k2 in [r[i].wrapping_sub(1), r[i] + 1] {
                if k2 < 1 || k2 > n {
                    continue;
                }
                let (s2, q2) = (
                    s + k2 as i64 - r[i] as i64,
                    q + (k2 * k2) as i64 - (r[i] * r[i]) as i64,
                );
                let gain = now - w.violation(s2, q2, n);
                if gain <= 0.0 {
                    continue;
                }
                let ratio = (costs.at(i, k2) - costs.at(i, r[i])) / gain;
                if best.is_none_or(|(b, _, _)| ratio < b) {
                    best = Some((ratio, i, k2));
                }
            }
        }
        let (_, i, k2) = best?;
        s += k2 as i64 - r[i] as i64;
        q += (k2 * k2) as i64 - (r[i] * r[i]) as i64;
        r[i] = k2;
    }
    Some(r)
}

/// Local search over feasible vectors: single unit moves and pairs of unit
/// moves, first improvement, until no move lowers the cost.
fn improve(costs: &CostTable, w: &Windows, mut r: Vec<usize>) -> Vec<usize> {
    let n = costs.n;
    let (mut s, mut q) = sums(&r);
    let tol = 1e-13;
    let moves = |k: usize| {
        [k.wrapping_sub(1), k + 1]
            .into_iter()
            .filter(move |&k2| k2 >= 1 && k2 <= n)
    };
    for _ in 0..10 * n {
        let mut improved = false;
        for i in 0..n {
            for a in moves(r[i]) {
                let di = costs.at(i, a) - costs.at(i, r[i]);
                let si = s + a as i64 - r[i] as i64;
                let qi = q + (a * a) as i64 - (r[i] * r[i]) as i64;
                if di < -tol && w.admits(si, qi) {
                    r[i] = a;
                    (s, q) = (si, qi);
                    improved = true;
                    continue;
                }
                for j in (i + 1)..n {
                    for b in moves(r[j]) {
                        let d = di + costs.at(j, b) - costs.at(j, r[j]);
                        if d >= -tol {
                            continue;
                        }
                        let sj = si + b as i64 - r[j] as i64;
                        let qj = qi + (b * b) as i64 - (r[j] * r[j]) as i64;
                        if w.admits(sj, qj) {
                            r[i] = a;
                            r[j] = b;
                            (s, q) = (sj, qj);
                            improved = true;
                            break;
                        }
                    }
                    if improved {
                        break;
                    }
                }
                if improved {
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    r
}

/// Sum-feasible vectors from exact sum-only solves with a square penalty
/// `mu k^2`. The sum of squares of those solves falls as `mu` grows; the
/// penalty is bisected to the point where it crosses the violated edge of
/// the square window, and the vectors on both sides are returned. The one
/// inside is within `|mu| * (distance to the edge)` of the optimum.
fn penalized_candidates(costs: &CostTable, w: &Windows, mu0: f64) -> Vec<Vec<usize>> {
    let n = costs.n;
    let solve_at = |mu: f64| -> Option<(Vec<usize>, i64)> {
        let table = costs.penalized(mu);
        let shape = if table.nearly_convex() {
            Shape::Convex
        } else if n <= 12 {
            Shape::General
        } else {
            return None;
        };
        let r = sum_optimal(&table, shape, w.lo, w.hi).ok()?;
        let q = sums(&r).1;
        Some((r, q))
    };
    let Some((r0, q0)) = solve_at(0.0) else {
        return Vec::new();
    };
    if (w.lo2..=w.hi2).contains(&q0) {
        return vec![r0];
    }
    let sign = if q0 > w.hi2 { 1.0 } else { -1.0 };
    let inside = |q: i64| if sign > 0.0 { q <= w.hi2 } else { q >= w.lo2 };
    let floor = 1e-12 * (1.0 + costs.cells.iter().fold(0.0f64, |m, c| m.max(c.abs())));
    let mut step = if mu0 * sign > 0.0 { mu0.abs() } else { floor };
    let (mut a, mut ra) = (0.0, r0);
    let mut found = None;
    for _ in 0..200 {
        let m = sign * step;
        match solve_at(m) {
            Some((r, q)) if inside(q) => {
                found = Some((m, r));
                break;
            }
            Some((r, _)) => {
                a = m;
                ra = r;
            }
            None => break,
        }
        step *= 2.0;
    }
    let Some((mut b, mut rb)) = found else {
        return vec![ra];
    };
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        match solve_at(m) {
            Some((r, q)) if inside(q) => {
                b = m;
                rb = r;
            }
            Some((r, _)) => {
                a = m;
                ra = r;
            }
            None => break,
        }
    }
    vec![rb, ra]
}

struct SearchNode {
    sum: i64,
    sq: i64,
    reduced: f64,
    parent: u32,
    position: u32,
}

/// Outcome of the two-budget search: the best vector found and whether it
/// is certified optimal.
struct Searched {
    rank: Vec<usize>,
    exact: bool,
}

/// Exact minimization with both budgets by Lagrangian branch and bound.
///
/// 1. Subgradient ascent on the multipliers `(lambda, mu)` of the two
///    budgets gives a lower bound; repaired and locally improved minimizers
///    of the relaxation (and a permutation) give feasible upper bounds.
/// 2. A layered search over `(sum, sum of squares)` states then keeps only
///    partial assignments whose reduced cost
///    `sum_j (c_j(k_j) + lambda k_j + mu k_j^2 - min_k (...))` stays within
///    the duality gap. Every feasible vector at most as costly as the
///    incumbent survives, so the best feasible final state is optimal.
///
/// If the search exceeds its work limit the incumbent is returned uncertified.
fn two_budget_search(costs: &CostTable, space: &RankSpace, work_limit: usize) -> Searched {
    let n = costs.n;
    let w = Windows::of(space);
    let u = costs.row_minimizers();

    let mut incumbent = improve(costs, &w, incumbent_permutation(costs, &u));
    let mut upper = total_cost(costs, &incumbent);
    let offer = |r: Vec<usize>, upper: &mut f64, incumbent: &mut Vec<usize>| {
        if let Some(r) = repair(costs, &w, r) {
            let r = improve(costs, &w, r);
            let c = total_cost(costs, &r);
            if c < *upper {
                *upper = c;
                *incumbent = r;
            }
        }
    };
    offer(u.clone(), &mut upper, &mut incumbent);

    let dual = Dual::new(costs, w);
    let (lambda, mu, relaxed) = dual.maximize();
    offer(relaxed.arg, &mut upper, &mut incumbent);
    for r in penalized_candidates(costs, &w, mu) {
        offer(r, &mut upper, &mut incumbent);
    }
    if upper - relaxed.value <= 1e-12 * upper.abs().max(1.0) {
        return Searched {
            rank: incumbent,
            exact: true,
        };
    }
    let nf = n as f64;
    // per-coordinate penalized minima and candidate positions by reduced cost
    let mut floor = vec![0.0; n];
    let mut cands: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    for i in 0..n {
        let p: Vec<(f64, usize)> = (1..=n)
            .map(|k| {
                let kf = k as f64;
                (costs.at(i, k) + lambda * kf + mu * kf * kf, k)
            })
            .collect();
        let m = p.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        floor[i] = m;
        let mut c: Vec<(f64, usize)> = p.into_iter().map(|(v, k)| (v - m, k)).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.push(c);
    }
    let base: f64 = floor.iter().sum();
    let lower = base - support(lambda, w.lo, w.hi) - support(mu, w.lo2, w.hi2);
    let scale = 1.0 + upper.abs() + base.abs() + nf * (lambda.abs() * nf + mu.abs() * nf * nf);
    let eps = 1e-12 * scale * nf;
    let search = Layered {
        cands: &cands,
        w,
        lambda,
        mu,
        base,
    };

    // Iterative deepening on the admitted excess over the lower bound: a
    // round with threshold t sees every feasible vector costing at most
    // lower + t, so its best one is optimal once it costs no more than that.
    let full = upper - lower + eps;
    let mut threshold = (full / 1024.0).max(eps);
    let mut budget = work_limit;
    loop {
        let last = threshold >= full;
        let t = threshold.min(full);
        match search.run(t, &mut budget) {
            None => {
                return Searched {
                    rank: incumbent,
                    exact: false,
                }
            }
            Some(Some(r)) => {
                let c = total_cost(costs, &r);
                if c < upper {
                    upper = c;
                    incumbent = r;
                }
                if c <= lower + t {
                    break;
                }
            }
            Some(None) => {}
        }
        if last {
            break;
        }
        threshold *= 4.0;
    }
    Searched {
        rank: incumbent,
        exact: true,
    }
}

struct Layered<'a> {
    cands: &'a [Vec<(f64, usize)>],
    w: Windows,
    lambda: f64,
    mu: f64,
    base: f64,
}

impl Layered<'_> {
    /// Best feasible vector among those whose reduced cost plus remaining
    /// slackness stays within `threshold`; `None` when `budget` runs out.
    fn run(&self, threshold: f64, budget: &mut usize) -> Option<Option<Vec<usize>>> {
        let n = self.cands.len();
        let nn = n as i64;
        let (w, lambda, mu) = (self.w, self.lambda, self.mu);
        let mut layers: Vec<Vec<SearchNode>> = Vec::with_capacity(n + 1);
        layers.push(vec![SearchNode {
            sum: 0,
            sq: 0,
            reduced: 0.0,
            parent: 0,
            position: 0,
        }]);
        for i in 0..n {
            let rest = (n - i - 1) as i64;
            let prev = &layers[i];
            let mut index: HashMap<(i64, i64), usize> = HashMap::new();
            let mut layer: Vec<SearchNode> = Vec::new();
            for (pi, node) in prev.iter().enumerate() {
                for &(r, k) in &self.cands[i] {
                    let reduced = node.reduced + r;
                    if reduced > threshold {
                        break;
                    }
                    *budget = budget.checked_sub(1)?;
                    let kk = k as i64;
                    let (s, q) = (node.sum + kk, node.sq + kk * kk);
                    // the remaining coordinates add between rest and rest n
                    // (squares: rest n^2)
                    let (tmin, tmax) = ((s + rest).max(w.lo), (s + rest * nn).min(w.hi));
                    let (qmin, qmax) = ((q + rest).max(w.lo2), (q + rest * nn * nn).min(w.hi2));
                    if tmin > tmax || qmin > qmax {
                        continue;
                    }
                    // complementary slackness the final sums must still pay
                    let slack1 = support(lambda, w.lo, w.hi) - support(lambda, tmin, tmax);
                    let slack2 = support(mu, w.lo2, w.hi2) - support(mu, qmin, qmax);
                    if reduced + slack1 + slack2 > threshold {
                        continue;
                    }
                    match index.get(&(s, q)) {
                        Some(&slot) => {
                            if reduced < layer[slot].reduced {
                                layer[slot].reduced = reduced;
                                layer[slot].parent = pi as u32;
                                layer[slot].position = k as u32;
                            }
                        }
                        None => {
                            index.insert((s, q), layer.len());
                            layer.push(SearchNode {
                                sum: s,
                                sq: q,
                                reduced,
                                parent: pi as u32,
                                position: k as u32,
                            });
                        }
                    }
                }
            }
            layers.push(layer);
        }

        // true cost of a final state: base + reduced - lambda T - mu Q
        let best = layers[n]
            .iter()
            .enumerate()
            .filter(|(_, nd)| w.admits(nd.sum, nd.sq))
            .map(|(idx, nd)| {
                let c = self.base + nd.reduced - lambda * nd.sum as f64 - mu * nd.sq as f64;
                (idx, c)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((mut idx, _)) = best else {
            return Some(None);
        };
        let mut r = vec![0usize; n];
        for i in (0..n).rev() {
            let nd = &layers[i + 1][idx];
            r[i] = nd.position as usize;
            idx = nd.parent as usize;
        }
        Some(Some(r))
    }
}

/// A permutation obtained by a cheapest-first assignment of objects to
/// distinct positions. Every permutation lies in both rank spaces, so this is
/// a valid starting bound.
fn incumbent_permutation(costs: &CostTable, u: &[usize]) -> Vec<usize> {
    let n = costs.n;
    let mut objects: Vec<usize> = (0..n).collect();
    objects.sort_by(|&a, &b| u[a].cmp(&u[b]).then(a.cmp(&b)));
    let mut r = vec![0; n];
    for (slot, obj) in objects.into_iter().enumerate() {
        r[obj] = slot + 1;
    }
    // Two-opt over pairs: swapping positions between objects only lowers cost.
    loop {
        let mut improved = false;
        for a in 0..n {
            for b in (a + 1)..n {
                let now = costs.at(a, r[a]) + costs.at(b, r[b]);
                let swapped = costs.at(a, r[b]) + costs.at(b, r[a]);
                if swapped < now {
                    r.swap(a, b);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_scores_return_the_truth() {
        let theta = [1.0, 2.0, 3.5, 4.0, 7.0];
        let r = RankVector::new(vec![2, 1, 3, 5, 4]).unwrap();
        let s: Vec<f64> = r.entries().iter().map(|&k| theta[k - 1]).collect();
        let space = RankSpace::new(5, 1).unwrap();
        let got = feature_match(&sv(&s), &theta, &space).unwrap();
        assert_eq!(got, r);
        assert_eq!(matching_objective(&sv(&s), &theta, &got), 0.0);
    }

    #[test]
    fn unconstrained_nearest_kept_when_feasible() {
        let theta = [1.0, 2.0, 3.0, 4.0];
        let space = RankSpace::new(4, 1).unwrap();
        let got = feature_match(&sv(&[1.1, 1.2, 3.0, 4.0]), &theta, &space).unwrap();
        assert_eq!(got.entries(), &[1, 1, 3, 4]);
    }

    #[test]
    fn repair_moves_the_cheapest_coordinate() {
        let theta = [1.0, 2.0, 3.0, 4.0];
        let space = RankSpace::new(4, 1).unwrap();
        // unconstrained (1,1,1,4) has sum 7; must reach >= 9
        let s = sv(&[1.0, 1.45, 1.1, 4.0]);
        let got = feature_match(&s, &theta, &space).unwrap();
        assert!(space.contains(&got));
        assert_eq!(got.entries(), &[1, 2, 2, 4]);
    }

    #[test]
    fn all_repair_paths_agree() {
        // A linear theta exercises every solver shape on the same instance.
        let theta: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
        let s = vec![0.1, 0.2, 0.3, 0.2, 0.1, 0.4, 0.3, 0.2];
        let costs = CostTable::new(&s, &theta);
        let space = RankSpace::new(8, 2).unwrap();
        let obj = |r: &RankVector| matching_objective(&sv(&s), &theta, r);
        let a = solve(&costs, Shape::Convex, &space, true).unwrap();
        let b = solve(&costs, Shape::Unimodal, &space, true).unwrap();
        let c = solve(&costs, Shape::General, &space, true).unwrap();
        assert!((obj(&a) - obj(&b)).abs() < 1e-12);
        assert!((obj(&a) - obj(&c)).abs() < 1e-12);
        assert!(space.contains(&a));
    }

    #[test]
    fn square_budget_respected() {
        let theta: Vec<f64> = (1..=6).map(|k| k as f64).collect();
        // all objects want the middle positions; sum fine, squares too small
        let s = sv(&[3.4, 3.4, 3.6, 3.6, 3.5, 3.5]);
        let space = RankSpace::with_square_budget(6, 2, 3).unwrap();
        let got = feature_match(&s, &theta, &space).unwrap();
        assert!(space.contains(&got));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let space = RankSpace::new(3, 1).unwrap();
        assert!(feature_match(&sv(&[1.0, 2.0]), &[1.0, 2.0, 3.0], &space).is_err());
        assert!(feature_match(&sv(&[1.0, 2.0, 3.0]), &[1.0, 2.0], &space).is_err());
    }

    #[test]
    fn linear_surrogate_matches_generic() {
        let s = sv(&[0.3, -1.2, 2.2, 0.9, 0.1, 1.7]);
        let space = RankSpace::with_square_budget(6, 2, 14).unwrap();
        let theta: Vec<f64> = (1..=6).map(|k| -0.4 + 0.55 * k as f64).collect();
        let a = feature_match_linear(&s, -0.4, 0.55, &space).unwrap();
        let b = feature_match(&s, &theta, &space).unwrap();
        assert!(
            (matching_objective(&s, &theta, &a) - matching_objective(&s, &theta, &b)).abs() < 1e-12
        );
    }
}
