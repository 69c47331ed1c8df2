use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rank_phase::estimators::{profile_ls_estimate, score_adaptive, ProfileOptions, ScoreKind};
use rank_phase::oracle::oracle_check;
use rank_phase::rank::{default_square_budget, default_sum_budget};
use rank_phase::simulation::regimes::RegimeFit;
use rank_phase::simulation::{
    fit_regimes, run_experiment, worker_count_from_env, ExperimentConfig, RegimeReport, ResultRow,
};
use rank_phase::verify::run_identity_suite;
use rank_phase::RankSpace;

use crate::args::{
    EstimateArgs, Kind, OracleCheckArgs, Overrides, PhaseDiagramArgs, SimulateArgs, VerifyArgs,
};
use crate::error::{CliError, CliResult};
use crate::matrix_csv::read_matrix;
use crate::table::{num, read_results, write_results};

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

impl Overrides {
    fn is_empty(&self) -> bool {
        self.seed.is_none()
            && self.reps.is_none()
            && self.n.is_none()
            && self.snr.is_none()
            && self.c_n.is_none()
            && self.c_n_sq.is_none()
    }

    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(reps) = self.reps {
            config.reps = reps;
        }
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(snr) = &self.snr {
            config.snr_grid = Some(snr.clone());
            config.beta_grid = None;
        }
        if self.c_n.is_some() {
            config.c_n = self.c_n;
        }
        if self.c_n_sq.is_some() {
            config.c_n_sq = self.c_n_sq;
        }
    }
}

fn simulate_rows(config_path: &Path, overrides: &Overrides) -> CliResult<Vec<ResultRow>> {
    let mut config = load_config(config_path)?;
    overrides.apply(&mut config);
    config.validate()?;
    let threads = worker_count_from_env()?;
    Ok(run_experiment(&config, threads)?)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rows = simulate_rows(&args.config, &args.overrides)?;
    let report = fit_regimes(&rows)?;
    let summary = grid_table(&report);
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_results(&mut buf, &rows)?;
            write_file(path, &buf)?;
            emit(stdout, &summary)
        }
        None => {
            write_results(&mut *stdout, &rows)?;
            eprint!("{summary}");
            Ok(())
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::failure(format!("writing output: {e}")))
}

/// Per-grid-point means, medians and recovery rates.
pub fn grid_table(report: &RegimeReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} model, n = {}, estimator {}",
        report.model, report.n, report.estimator
    );
    let qs: Vec<f64> = report
        .grid
        .first()
        .map(|g| g.losses.iter().map(|l| l.q).collect())
        .unwrap_or_default();
    let _ = write!(
        s,
        "{:>12} {:>12} {:>11} {:>5} {:>9}",
        "snr", "beta", "regime", "reps", "recovery"
    );
    for q in &qs {
        let _ = write!(
            s,
            " {:>12} {:>12}",
            format!("mean_l{q}"),
            format!("median_l{q}")
        );
    }
    s.push('\n');
    for g in &report.grid {
        let _ = write!(
            s,
            "{:>12.5e} {:>12.5e} {:>11} {:>5} {:>9.3}",
            g.snr,
            g.beta,
            regime_label(g.regime),
            g.reps,
            g.recovery_rate
        );
        for l in &g.losses {
            let _ = write!(s, " {:>12.5e} {:>12.5e}", l.mean, l.median);
        }
        s.push('\n');
    }
    s
}

fn regime_label(r: rank_phase::simulation::Regime) -> &'static str {
    use rank_phase::simulation::Regime::*;
    match r {
        Trivial => "trivial",
        Polynomial => "polynomial",
        Exponential => "exponential",
        Exact => "exact",
    }
}

fn axis_label(fit: &RegimeFit) -> &'static str {
    match fit.axis {
        rank_phase::simulation::regimes::FitAxis::LogLossVsSnr => "log_loss_vs_snr",
        rank_phase::simulation::regimes::FitAxis::LogLossVsLogSnr => "log_loss_vs_log_snr",
    }
}

fn fits_text(report: &RegimeReport) -> String {
    let mut s = String::from("slope fits:\n");
    for f in &report.fits {
        match (&f.fit, &f.gap) {
            (Some(line), _) => {
                let _ = writeln!(
                    s,
                    "  {:<11} q={:<4} {:<20} slope {:>9.4} +/- {:.4}  R^2 {:.4}  ({} points)",
                    regime_label(f.regime),
                    f.q,
                    axis_label(f),
                    line.slope,
                    line.slope_std_error,
                    line.r_squared,
                    line.x.len()
                );
            }
            (None, gap) => {
                let _ = writeln!(
                    s,
                    "  {:<11} q={:<4} no fit: {}",
                    regime_label(f.regime),
                    f.q,
                    gap.as_deref().unwrap_or("not enough points")
                );
            }
        }
    }
    s
}

fn summary_csv(report: &RegimeReport) -> String {
    let mut s = String::from(
        "snr,beta,regime,snr_over_log_n,reps,q,mean_loss,median_loss,std_error,\
         recovery_rate,recovery_std_error,mean_iters\n",
    );
    for g in &report.grid {
        for l in &g.losses {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                num(g.snr),
                num(g.beta),
                regime_label(g.regime),
                num(g.snr_over_log_n),
                g.reps,
                num(l.q),
                num(l.mean),
                num(l.median),
                num(l.std_error),
                num(g.recovery_rate),
                num(g.recovery_std_error),
                num(g.mean_iters)
            );
        }
    }
    s
}

fn fits_csv(report: &RegimeReport) -> String {
    let mut s =
        String::from("regime,q,axis,points,slope,slope_std_error,intercept,r_squared,gap\n");
    for f in &report.fits {
        let (points, cols) = match &f.fit {
            Some(l) => (
                l.x.len(),
                format!(
                    "{},{},{},{}",
                    num(l.slope),
                    num(l.slope_std_error),
                    num(l.intercept),
                    num(l.r_squared)
                ),
            ),
            None => (0, ",,,".to_string()),
        };
        let gap = f.gap.as_deref().unwrap_or("").replace(['"', ','], ";");
        let _ = writeln!(
            s,
            "{},{},{},{points},{cols},{gap}",
            regime_label(f.regime),
            num(f.q),
            axis_label(f)
        );
    }
    s
}

pub fn phase_diagram(args: &PhaseDiagramArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rows = match (&args.config, &args.from_csv) {
        (Some(config), None) => simulate_rows(config, &args.overrides)?,
        (None, Some(csv_path)) => {
            if !args.overrides.is_empty() {
                return Err(CliError::usage(
                    "configuration overrides cannot be combined with --from-csv",
                ));
            }
            let file = fs::File::open(csv_path)
                .map_err(|e| CliError::usage(format!("{}: {e}", csv_path.display())))?;
            read_results(file)?
        }
        _ => {
            return Err(CliError::usage(
                "give exactly one of --config and --from-csv",
            ))
        }
    };
    let report = fit_regimes(&rows)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    if args.config.is_some() {
        let mut buf = Vec::new();
        write_results(&mut buf, &rows)?;
        write_file(&args.out.join("results.csv"), &buf)?;
    }
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::failure(format!("serializing report: {e}")))?;
    json.push('\n');
    write_file(&args.out.join("regimes.json"), json.as_bytes())?;
    write_file(
        &args.out.join("summary.csv"),
        summary_csv(&report).as_bytes(),
    )?;
    write_file(&args.out.join("fits.csv"), fits_csv(&report).as_bytes())?;
    let mut text = grid_table(&report);
    text.push_str(&fits_text(&report));
    let mut seen = std::collections::BTreeSet::new();
    for gap in report.gaps.iter().filter(|g| seen.insert(g.as_str())) {
        let _ = writeln!(text, "gap: {gap}");
    }
    emit(stdout, &text)
}

pub fn estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let file = fs::File::open(&args.input)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.input.display())))?;
    let x = read_matrix(file)?;
    let n = x.n();
    let kind = match args.kind {
        Kind::Comparison => ScoreKind::Comparison,
        Kind::Collaboration => ScoreKind::Collaboration,
    };
    let s = score_adaptive(&x, kind)?;
    let (lo, hi) = s
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        return Err(CliError::failure(format!(
            "degenerate fit: all {n} scores equal {lo}; the slope is not identifiable"
        )));
    }
    let space = RankSpace::with_square_budget(
        n,
        args.c_n.unwrap_or_else(|| default_sum_budget(n)),
        args.c_n_sq.unwrap_or_else(|| default_square_budget(n)),
    )?;
    let options = ProfileOptions {
        max_iters: args.max_iters,
        ..ProfileOptions::default()
    };
    let (r, trace) = profile_ls_estimate(&s, &space, None, options)?;
    let pl = *trace
        .objective_path
        .last()
        .expect("path starts with the initial objective");
    let mut text = String::new();
    let _ = writeln!(text, "# intercept {}", num(trace.final_fit.a_hat));
    let _ = writeln!(text, "# slope {}", num(trace.final_fit.b_hat));
    let _ = writeln!(text, "# profile_ls {}", num(pl));
    let _ = writeln!(text, "# iterations {}", trace.iterations);
    text.push_str("index,rank\n");
    for (i, k) in r.entries().iter().enumerate() {
        let _ = writeln!(text, "{},{k}", i + 1);
    }
    write_file(&args.out, text.as_bytes())?;
    emit(
        stdout,
        &format!(
            "n = {n}: slope {:.6}, intercept {:.6}, PL {:.6e}, {} iterations{}\n",
            trace.final_fit.b_hat,
            trace.final_fit.a_hat,
            pl,
            trace.iterations,
            if trace.converged {
                ""
            } else {
                " (iteration limit reached)"
            }
        ),
    )
}

pub fn oracle(args: &OracleCheckArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let report = oracle_check(args.n, args.instances, args.seed)?;
    let mut text = format!(
        "oracle check: n = {}, {} instances, seed {}\n",
        report.n, report.instances, report.seed
    );
    for (label, stats) in [
        ("feature_match (sum budget)", &report.feature_match_sum),
        (
            "feature_match (square budget)",
            &report.feature_match_square,
        ),
        ("profile_ls (reported only)", &report.profile_ls),
    ] {
        let _ = writeln!(
            text,
            "  {label:<31} match rate {:.4} ({}/{}), worst gap {:.3e} (seed {})",
            stats.rate(),
            stats.matches,
            stats.instances,
            stats.worst_gap,
            stats.worst_seed
        );
    }
    emit(stdout, &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::failure(
            "feature matching disagreed with exhaustive search",
        ))
    }
}

pub fn verify(args: &VerifyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let report = run_identity_suite(args.fail_inject.as_deref())?;
    let mut text = String::new();
    for r in &report.results {
        let _ = writeln!(
            text,
            "{} {:<22} {:>6} instances  max deviation {:.3e}  tolerance {:.0e}{}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.max_deviation,
            r.tolerance,
            r.failing_seed
                .map(|s| format!("  failing seed {s}"))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(text, "elapsed {:.0} ms", report.elapsed_ms);
    emit(stdout, &text)?;
    let failed: Vec<String> = report
        .failures()
        .map(|r| match r.failing_seed {
            Some(seed) => format!("{} (seed {seed})", r.name),
            None => r.name.clone(),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "identity check failed: {}",
            failed.join(", ")
        )))
    }
}
