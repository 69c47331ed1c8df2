//! Aggregation of replicated runs and slope fits per error regime.
//!
//! | regime | SNR range | expected mean loss |
//! |--------|-----------|--------------------|
//! | trivial | `SNR <= n^-2` | order of the maximal loss |
//! | polynomial | `n^-2 < SNR <= 1` | `SNR^(-q/2)` |
//! | exponential | `1 < SNR <= log n` | `exp(-(1 + o(1)) SNR)` |
//! | exact | `SNR > log n` | exact recovery with high probability |
//!
//! Boundary points belong to the lower regime.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::model::ModelKind;
use crate::simulation::config::EstimatorKind;
use crate::simulation::runner::ResultRow;

/// Fewest grid points a slope fit is attempted on.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Trivial,
    Polynomial,
    Exponential,
    Exact,
}

impl Regime {
    pub fn classify(snr: f64, n: usize) -> Regime {
        let n = n as f64;
        if snr <= 1.0 / (n * n) {
            Regime::Trivial
        } else if snr <= 1.0 {
            Regime::Polynomial
        } else if snr <= n.ln() {
            Regime::Exponential
        } else {
            Regime::Exact
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub q: f64,
    pub mean: f64,
    pub median: f64,
    /// Standard error of the mean.
    pub std_error: f64,
}

/// Replications at one grid point, aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub snr: f64,
    pub beta: f64,
    pub regime: Regime,
    pub reps: usize,
    pub losses: Vec<LossSummary>,
    pub recovery_rate: f64,
    pub recovery_std_error: f64,
    pub snr_over_log_n: f64,
    pub mean_iters: f64,
}

impl GridSummary {
    pub fn loss(&self, q: f64) -> Option<&LossSummary> {
        self.losses.iter().find(|l| l.q == q)
    }
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; 0 when the line interpolates two points.
    pub slope_std_error: f64,
    pub r_squared: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// SNR values of the grid points that fed the fit.
    pub snr_points: Vec<f64>,
}

/// Fits a line through `(x, y)`. `None` with fewer than two distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let k = x.len();
    if k != y.len() || k < 2 {
        return None;
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_std_error = if k > 2 {
        (rss / (kf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_std_error,
        r_squared,
        x: x.to_vec(),
        y: y.to_vec(),
        snr_points: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    /// `log(mean loss)` against SNR.
    LogLossVsSnr,
    /// `log(mean loss)` against `log(SNR)`.
    LogLossVsLogSnr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    pub regime: Regime,
    pub q: f64,
    pub axis: FitAxis,
    pub fit: Option<LineFit>,
    /// Why the fit is missing or partial.
    pub gap: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub snr: f64,
    pub snr_over_log_n: f64,
    pub rate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub model: ModelKind,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub grid: Vec<GridSummary>,
    pub fits: Vec<RegimeFit>,
    pub recovery_curve: Vec<RecoveryPoint>,
    pub gaps: Vec<String>,
}

impl RegimeReport {
    pub fn fit(&self, regime: Regime, q: f64) -> Option<&LineFit> {
        self.fits
            .iter()
            .find(|f| f.regime == regime && f.q == q)
            .and_then(|f| f.fit.as_ref())
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn summarize(n: usize, q_list: &[f64], rows: &[&ResultRow]) -> Result<GridSummary> {
    let first = rows[0];
    let mut losses = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let v = rows
            .iter()
            .map(|r| {
                r.loss(q).ok_or_else(|| {
                    RankError::input(format!(
                        "row rep {} at snr {} lacks loss q = {q}",
                        r.rep, r.snr
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, std_error) = mean_and_se(&v);
        losses.push(LossSummary {
            q,
            mean,
            median: median(&v),
            std_error,
        });
    }
    let hits: Vec<f64> = rows
        .iter()
        .map(|r| if r.exact_recovery { 1.0 } else { 0.0 })
        .collect();
    let (recovery_rate, recovery_std_error) = mean_and_se(&hits);
    let iters: Vec<f64> = rows.iter().map(|r| r.iters as f64).collect();
    Ok(GridSummary {
        snr: first.snr,
        beta: first.beta,
        regime: Regime::classify(first.snr, n),
        reps: rows.len(),
        losses,
        recovery_rate,
        recovery_std_error,
        snr_over_log_n: first.snr / (n as f64).ln(),
        mean_iters: mean_and_se(&iters).0,
    })
}

fn regime_fit(
    grid: &[GridSummary],
    regime: Regime,
    q: f64,
    axis: FitAxis,
    member: impl Fn(&GridSummary) -> bool,
    label: &str,
) -> RegimeFit {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut snrs = Vec::new();
    let mut dropped = 0;
    for g in grid.iter().filter(|g| member(g)) {
        let mean = g.loss(q).map_or(0.0, |l| l.mean);
        if !(mean > 0.0) || !g.snr.is_finite() {
            dropped += 1;
            continue;
        }
        x.push(match axis {
            FitAxis::LogLossVsSnr => g.snr,
            FitAxis::LogLossVsLogSnr => g.snr.ln(),
        });
        y.push(mean.ln());
        snrs.push(g.snr);
    }
    let mut notes = Vec::new();
    if dropped > 0 {
        notes.push(format!(
            "{dropped} grid point(s) in the {label} range had zero mean loss (or infinite SNR) and were left out"
        ));
    }
    let fit = if x.len() < MIN_FIT_POINTS {
        notes.push(format!(
            "{label} fit for q = {q} needs {MIN_FIT_POINTS} grid points with positive mean loss, found {}",
            x.len()
        ));
        None
    } else {
        fit_line(&x, &y).map(|mut f| {
            f.snr_points = snrs;
            f
        })
    };
    RegimeFit {
        regime,
        q,
        axis,
        fit,
        gap: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

/// Aggregates rows by SNR (in order of first appearance) and fits, for every
/// positive loss order:
///
/// * the polynomial regime: `log(mean loss)` against `log(SNR)`;
/// * every point with `SNR > 1`: `log(mean loss)` against `SNR`. Points past
///   `log n` are kept, since the mean loss keeps decaying at the same rate
///   there; points with zero mean loss are dropped.
///
/// Fits with too few points are left empty and explained in `gap`.
pub fn fit_regimes(rows: &[ResultRow]) -> Result<RegimeReport> {
    let first = rows
        .first()
        .ok_or_else(|| RankError::input("no result rows to summarize"))?;
    let n = first.n;
    if let Some(r) = rows
        .iter()
        .find(|r| r.n != n || r.model != first.model || r.estimator != first.estimator)
    {
        return Err(RankError::input(format!(
            "rows mix experiments: ({}, n = {}, {}) and ({}, n = {}, {})",
            first.model, n, first.estimator, r.model, r.n, r.estimator
        )));
    }
    let q_list: Vec<f64> = first.losses.iter().map(|l| l.q).collect();

    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, Vec<&ResultRow>> = HashMap::new();
    for r in rows {
        let key = r.snr.to_bits();
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let grid = order
        .iter()
        .map(|k| summarize(n, &q_list, &groups[k]))
        .collect::<Result<Vec<_>>>()?;

    let mut fits = Vec::new();
    for &q in q_list.iter().filter(|&&q| q > 0.0) {
        fits.push(regime_fit(
            &grid,
            Regime::Polynomial,
            q,
            FitAxis::LogLossVsLogSnr,
            |g| g.regime == Regime::Polynomial,
            "polynomial",
        ));
        fits.push(regime_fit(
            &grid,
            Regime::Exponential,
            q,
            FitAxis::LogLossVsSnr,
            |g| g.snr > 1.0,
            "exponential",
        ));
    }
    let mut gaps: Vec<String> = fits.iter().filter_map(|f| f.gap.clone()).collect();
    if q_list.iter().all(|&q| q == 0.0) {
        gaps.push("no positive loss order recorded; no slope fits".into());
    }
    let recovery_curve = grid
        .iter()
        .map(|g| RecoveryPoint {
            snr: g.snr,
            snr_over_log_n: g.snr_over_log_n,
            rate: g.recovery_rate,
            std_error: g.recovery_std_error,
        })
        .collect();
    Ok(RegimeReport {
        model: first.model,
        n,
        estimator: first.estimator,
        grid,
        fits,
        recovery_curve,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::runner::QLoss;

    fn row(snr: f64, rep: usize, l2: f64) -> ResultRow {
        ResultRow {
            model: ModelKind::DifferentialComparison,
            n: 100,
            snr,
            beta: 0.0,
            sigma: 1.0,
            estimator: EstimatorKind::FeatureMatchOracleTheta,
            rep,
            seed: 0,
            losses: vec![QLoss { q: 0.0, loss: 0.5 }, QLoss { q: 2.0, loss: l2 }],
            exact_recovery: false,
            iters: 0,
            wall_time_ms: None,
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(Regime::classify(1e-4, 100), Regime::Trivial);
        assert_eq!(Regime::classify(1.0001e-4, 100), Regime::Polynomial);
        assert_eq!(Regime::classify(1.0, 100), Regime::Polynomial);
        assert_eq!(Regime::classify(100f64.ln(), 100), Regime::Exponential);
        assert_eq!(Regime::classify(4.7, 100), Regime::Exact);
    }

    #[test]
    fn exponential_slope_of_fabricated_rows() {
        let rows: Vec<_> = [2.0, 3.0, 4.0]
            .iter()
            .flat_map(|&s| (0..2).map(move |rep| row(s, rep, (-s).exp())))
            .collect();
        let rep = fit_regimes(&rows).unwrap();
        let f = rep.fit(Regime::Exponential, 2.0).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.snr_points, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn polynomial_slope_of_fabricated_rows() {
        let rows: Vec<_> = [0.01, 0.1, 0.5, 1.0]
            .iter()
            .map(|&s| row(s, 0, 1.0 / s))
            .collect();
        let rep = fit_regimes(&rows).unwrap();
        let f = rep.fit(Regime::Polynomial, 2.0).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(rep.fit(Regime::Exponential, 2.0).is_none());
        assert!(!rep.gaps.is_empty());
    }

    #[test]
    fn aggregates_mean_median_and_recovery() {
        let mut rows = vec![row(2.0, 0, 1.0), row(2.0, 1, 2.0), row(2.0, 2, 6.0)];
        rows[1].exact_recovery = true;
        let rep = fit_regimes(&rows).unwrap();
        let g = &rep.grid[0];
        let l = g.loss(2.0).unwrap();
        assert_eq!(l.mean, 3.0);
        assert_eq!(l.median, 2.0);
        assert!((g.recovery_rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.regime, Regime::Exponential);
    }

    #[test]
    fn zero_loss_points_are_reported_as_gaps() {
        let rows = vec![row(2.0, 0, 0.1), row(3.0, 0, 0.05), row(5.0, 0, 0.0)];
        let rep = fit_regimes(&rows).unwrap();
        assert!(rep.fit(Regime::Exponential, 2.0).is_none());
        assert!(rep.gaps.iter().any(|g| g.contains("zero mean loss")));
    }

    #[test]
    fn mixed_experiments_rejected() {
        let mut rows = vec![row(2.0, 0, 0.1), row(3.0, 0, 0.05)];
        rows[1].n = 50;
        assert!(fit_regimes(&rows).is_err());
        assert!(fit_regimes(&[]).is_err());
    }
}
