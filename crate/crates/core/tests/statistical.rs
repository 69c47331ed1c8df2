//! Monte Carlo checks with fixed seeds. Each threshold sits well inside the
//! range the estimators reach at these sizes, so the checks are stable.

use rand::Rng;

use rank_phase::estimators::brute::argmin_over;
use rank_phase::estimators::brute::lse_objective;
use rank_phase::estimators::{
    feature_match, lse_brute_force, matching_objective, profile_ls_estimate, profile_ls_objective,
    score_adaptive, score_comparison, ProfileOptions, ScoreKind,
};
use rank_phase::model::{beta_for_snr, ModelKind, ModelSpec};
use rank_phase::poisson::{chernoff_check, poisson_mle_brute_force};
use rank_phase::simulation::generate::rng_from_seed;
use rank_phase::simulation::seed::mix;
use rank_phase::simulation::{
    generate_gaussian, generate_poisson, random_feasible_rank, run_experiment, EstimatorKind,
    ExperimentConfig, TrueRankPolicy,
};
use rank_phase::{RankSpace, RankVector};

fn differential(n: usize, snr: f64) -> ModelSpec {
    let beta = beta_for_snr(n, snr, 1.0).unwrap();
    ModelSpec::linear(ModelKind::DifferentialComparison, n, 0.0, beta).unwrap()
}

#[test]
fn profile_ls_reaches_the_global_minimum_when_well_separated() {
    let instances = 200;
    let mut matches = 0;
    for k in 0..instances {
        let seed = mix(&[11, k]);
        let mut rng = rng_from_seed(seed);
        let n = 4 + (k as usize % 3);
        let space = RankSpace::default_with_squares(n).unwrap();
        // distinct positions, so that every pair of objects is separated
        let truth = random_feasible_rank(&space, 0, mix(&[seed, 1]));
        let model = differential(n, rng.random_range(4.0..8.0));
        let x = generate_gaussian(&model, &truth, 1.0, mix(&[seed, 2])).unwrap();
        let s = score_adaptive(&x, ScoreKind::Comparison).unwrap();

        let (r, _) = profile_ls_estimate(&s, &space, None, ProfileOptions::default()).unwrap();
        let got = profile_ls_objective(&s, &r).unwrap();
        let (_, best) = argmin_over(&space, |r| {
            (!r.is_constant()).then(|| profile_ls_objective(&s, r).unwrap())
        })
        .unwrap()
        .unwrap();
        assert!(got >= best - 1e-12 * best.max(1.0));
        if got <= best + 1e-12 * best.max(1.0) {
            matches += 1;
        }
    }
    let rate = matches as f64 / instances as f64;
    assert!(
        rate >= 0.9,
        "profile LS reached the minimum on {rate:.3} of instances"
    );
}

#[test]
fn profile_ls_started_at_the_truth_keeps_it() {
    let n = 50;
    let model = differential(n, 3.0 * (n as f64).ln());
    let space = RankSpace::default_with_squares(n).unwrap();
    let truth = RankVector::identity(n);
    let reps = 100;
    let recovered = (0..reps)
        .filter(|&rep| {
            let x = generate_gaussian(&model, &truth, 1.0, mix(&[21, rep])).unwrap();
            let s = score_adaptive(&x, ScoreKind::Comparison).unwrap();
            let (r, _) =
                profile_ls_estimate(&s, &space, Some(&truth), ProfileOptions::default()).unwrap();
            r == truth
        })
        .count();
    assert!(recovered as f64 >= 0.9 * reps as f64, "{recovered}/{reps}");
}

/// For the differential model, with `S` the comparison score and
/// `D_r = sum_i theta_{r(i)} - sum_k theta_k`,
/// `LSE(r) = 2n * matching(r) - 2 D_r^2 + K` with `K` free of `r`.
#[test]
fn least_squares_matches_the_score_pipeline_objective() {
    for n in 3..=5 {
        for k in 0..20u64 {
            let seed = mix(&[31, n as u64, k]);
            let mut rng = rng_from_seed(seed);
            let model = ModelSpec::linear(
                ModelKind::DifferentialComparison,
                n,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.2..2.0),
            )
            .unwrap();
            let space = RankSpace::default_for(n).unwrap();
            let truth = random_feasible_rank(&space, n, mix(&[seed, 1]));
            let x = generate_gaussian(&model, &truth, rng.random_range(0.1..2.0), mix(&[seed, 2]))
                .unwrap();
            let theta = model.theta();
            let s = score_comparison(&x, theta).unwrap();
            let total: f64 = theta.iter().sum();
            let pipeline = |r: &RankVector| {
                let d: f64 = r.entries().iter().map(|&k| theta[k - 1]).sum::<f64>() - total;
                2.0 * n as f64 * matching_objective(&s, theta, r) - 2.0 * d * d
            };
            let identity = RankVector::identity(n);
            let offset = lse_objective(&x, &model, &identity).unwrap() - pipeline(&identity);

            let lse = lse_brute_force(&x, &model, &space).unwrap();
            let lse_value = lse_objective(&x, &model, &lse).unwrap();
            let (_, pipe_min) = argmin_over(&space, |r| Some(pipeline(r))).unwrap().unwrap();
            let scale = lse_value.abs().max(1.0);
            assert!(
                (lse_value - (pipe_min + offset)).abs() <= 1e-9 * scale,
                "n={n} k={k}: {lse_value} vs {}",
                pipe_min + offset
            );
        }
    }
}

#[test]
fn poisson_mle_recovers_the_lower_bound_construction() {
    let n = 5;
    // n beta^2 = 3 log n
    let beta = (3.0 * (n as f64).ln() / n as f64).sqrt();
    let model = ModelSpec::poisson_lower_bound(n, beta).unwrap();
    let space = RankSpace::default_for(n).unwrap();
    let truth = RankVector::identity(n);
    let reps = 100;
    let recovered = (0..reps)
        .filter(|&rep| {
            let x = generate_poisson(&model, &truth, mix(&[41, rep])).unwrap();
            poisson_mle_brute_force(&x, &model, &space).unwrap() == truth
        })
        .count();
    assert!(recovered as f64 >= 0.9 * reps as f64, "{recovered}/{reps}");
}

#[test]
fn chernoff_bound_holds_for_random_pairs() {
    let n = 5;
    let model = ModelSpec::poisson_lower_bound(n, 0.3).unwrap();
    let space = RankSpace::default_for(n).unwrap();
    for k in 0..20u64 {
        let r = random_feasible_rank(&space, 2 * n, mix(&[51, k, 0]));
        let mut r_tilde = random_feasible_rank(&space, 2 * n, mix(&[51, k, 1]));
        if r_tilde == r {
            r_tilde = RankVector::identity(n);
        }
        let check = chernoff_check(&model, &r, &r_tilde, 400, mix(&[51, k, 2])).unwrap();
        assert!(check.holds(), "pair {k}: {check:?}");
    }
}

#[test]
fn vanishing_noise_agrees_with_the_noiseless_shortcut() {
    let n = 20;
    let model = ModelSpec::linear(ModelKind::DifferentialComparison, n, 0.5, 0.7).unwrap();
    let space = RankSpace::default_for(n).unwrap();
    for k in 0..10u64 {
        let truth = random_feasible_rank(&space, n, mix(&[61, k]));
        let estimate = |sigma: f64| {
            let x = generate_gaussian(&model, &truth, sigma, mix(&[61, k, 1])).unwrap();
            let s = score_comparison(&x, model.theta()).unwrap();
            feature_match(&s, model.theta(), &space).unwrap()
        };
        let exact = estimate(0.0);
        for sigma in [1e-8, 1e-10, 1e-12] {
            assert_eq!(estimate(sigma), exact, "sigma = {sigma}");
        }
    }
}

#[test]
fn profile_ls_recovers_above_the_exact_threshold() {
    let n = 100;
    let config = ExperimentConfig {
        model: ModelKind::DifferentialComparison,
        n,
        sigma: 1.0,
        snr_grid: Some(vec![3.0 * (n as f64).ln()]),
        beta_grid: None,
        q_list: vec![0.0, 2.0],
        reps: 100,
        master_seed: 71,
        estimator: EstimatorKind::ProfileLsAdaptive,
        c_n: None,
        c_n_sq: None,
        true_rank: TrueRankPolicy::Identity,
        alpha: None,
        max_iters: 100,
        record_wall_time: false,
    };
    let rows = run_experiment(&config, 1).unwrap();
    let recovered = rows.iter().filter(|r| r.exact_recovery).count();
    assert!(recovered >= 90, "{recovered}/100");
}

#[test]
fn feature_match_recovers_at_n50_above_the_exact_threshold() {
    let n = 50;
    let model = differential(n, 3.0 * (n as f64).ln());
    let space = RankSpace::default_for(n).unwrap();
    let truth = RankVector::identity(n);
    let recovered = (0..50u64)
        .filter(|&rep| {
            let x = generate_gaussian(&model, &truth, 1.0, mix(&[81, rep])).unwrap();
            let s = score_comparison(&x, model.theta()).unwrap();
            feature_match(&s, model.theta(), &space).unwrap() == truth
        })
        .count();
    assert!(recovered >= 45, "{recovered}/50");
}
