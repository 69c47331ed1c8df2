use proptest::prelude::*;
use rand::Rng;

use rank_phase::estimators::brute::argmin_over;
use rank_phase::estimators::{
    feature_match, matching_objective, profile_ls_estimate, profile_ls_objective,
    profile_ls_objective_via_hat, ProfileOptions, ScoreVector,
};
use rank_phase::model::{signal_gap, signal_gap_closed_form, ModelKind, ModelSpec};
use rank_phase::poisson::{bhattacharyya_affinity, cell_affinity_series};
use rank_phase::simulation::generate::rng_from_seed;
use rank_phase::simulation::random_feasible_rank;
use rank_phase::{loss, PairMatrix, RankSpace, RankVector};

fn rank_vec(n: usize) -> impl Strategy<Value = RankVector> {
    prop::collection::vec(1..=n, n).prop_map(|v| RankVector::new(v).unwrap())
}

fn sized_pair(max_n: usize) -> impl Strategy<Value = (RankVector, RankVector)> {
    (3..=max_n).prop_flat_map(|n| (rank_vec(n), rank_vec(n)))
}

fn scores(n: usize) -> impl Strategy<Value = ScoreVector> {
    prop::collection::vec(-10.0..10.0f64, n).prop_map(|v| ScoreVector::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gap_closed_forms(
        (r, rt) in sized_pair(40),
        alpha in -3.0..3.0f64,
        beta in 0.01..3.0f64,
        kind in prop::sample::select(vec![
            ModelKind::DifferentialComparison,
            ModelKind::AdditiveCollaboration,
            ModelKind::PoissonSqrtLinear,
        ]),
    ) {
        let n = r.len();
        let model = if kind.is_poisson() {
            ModelSpec::poisson_lower_bound(n, beta).unwrap()
        } else {
            ModelSpec::linear(kind, n, alpha, beta).unwrap()
        };
        let direct = signal_gap(&model, &r, &rt).unwrap();
        let closed = signal_gap_closed_form(&model, &r, &rt).unwrap();
        prop_assert!((direct - closed).abs() <= 1e-9 * direct.abs().max(1e-12));
    }

    #[test]
    fn loss_axioms((a, b) in sized_pair(30), q in prop::sample::select(vec![0.0, 0.5, 1.0, 2.0])) {
        let n = a.len() as f64;
        let l = loss(q, &a, &b).unwrap();
        prop_assert_eq!(l, loss(q, &b, &a).unwrap());
        prop_assert_eq!(loss(q, &a, &a).unwrap(), 0.0);
        prop_assert!(l >= 0.0);
        let max = if q == 0.0 { 1.0 } else { (n - 1.0).powf(q) };
        prop_assert!(l <= max + 1e-12);
        prop_assert_eq!(loss(0.0, &a, &b).unwrap() == 0.0, a == b);
        let l2 = loss(2.0, &a, &b).unwrap();
        prop_assert!((l2 - a.squared_distance(&b) as f64 / n).abs() < 1e-12);
    }

    #[test]
    fn feature_match_is_feasible_and_beats_samples(
        n in 3usize..40,
        seed in any::<u64>(),
        squares in any::<bool>(),
    ) {
        let mut rng = rng_from_seed(seed);
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = ScoreVector::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let space = if squares {
            RankSpace::default_with_squares(n).unwrap()
        } else {
            RankSpace::default_for(n).unwrap()
        };
        let r = feature_match(&s, &theta, &space).unwrap();
        prop_assert!(space.contains(&r));
        let best = matching_objective(&s, &theta, &r);
        for k in 0..20 {
            let other = random_feasible_rank(&space, n, seed ^ k);
            prop_assert!(best <= matching_objective(&s, &theta, &other) + 1e-12);
        }
    }

    #[test]
    fn hat_matrix_and_regression_agree((r, _) in sized_pair(25), shift in -50.0..50.0f64, seed in any::<u64>()) {
        prop_assume!(!r.is_constant());
        let n = r.len();
        let v: Vec<f64> = (0..n).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 25.0).collect();
        let s = ScoreVector::new(v).unwrap();
        let a = profile_ls_objective(&s, &r).unwrap();
        let b = profile_ls_objective_via_hat(&s, &r).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        let c = profile_ls_objective(&s.shifted(shift), &r).unwrap();
        prop_assert!((a - c).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn random_feasible_rank_stays_feasible(n in 2usize..60, steps in 0usize..200, seed in any::<u64>()) {
        let space = RankSpace::default_with_squares(n).unwrap();
        let r = random_feasible_rank(&space, steps, seed);
        prop_assert!(space.contains(&r));
        prop_assert_eq!(r, random_feasible_rank(&space, steps, seed));
    }

    #[test]
    fn affinity_series_matches_closed_form(a in -1.0..4.0f64, b in -1.0..4.0f64) {
        let (a, b) = (10f64.powf(a), 10f64.powf(b));
        let closed = (-0.5 * (a.sqrt() - b.sqrt()).powi(2)).exp();
        let series = cell_affinity_series(a, b).unwrap();
        prop_assert!((closed - series).abs() < 1e-8);
        prop_assert!(series > 0.0 || closed < 1e-300);
    }

    #[test]
    fn affinity_range_and_symmetry(cells in prop::collection::vec((0.1..100.0f64, 0.1..100.0f64), 6)) {
        let mu = PairMatrix::from_cells(3, cells.iter().map(|c| c.0).collect()).unwrap();
        let mt = PairMatrix::from_cells(3, cells.iter().map(|c| c.1).collect()).unwrap();
        let ab = bhattacharyya_affinity(&mu, &mt).unwrap();
        prop_assert!(ab > 0.0 && ab <= 1.0);
        prop_assert_eq!(ab, bhattacharyya_affinity(&mt, &mu).unwrap());
        prop_assert_eq!(bhattacharyya_affinity(&mu, &mu).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_match_equals_enumeration(n in 3usize..=5, s in scores(5), theta in scores(5), c in 1u64..=2, c2 in 1u64..=11) {
        let s = ScoreVector::new(s.values()[..n].to_vec()).unwrap();
        let theta = &theta.values()[..n];
        for space in [RankSpace::new(n, c).unwrap(), RankSpace::with_square_budget(n, c, c2.min((n * n * n) as u64 - 1)).unwrap()] {
            let got = feature_match(&s, theta, &space).unwrap();
            let (_, best) = argmin_over(&space, |r| Some(matching_objective(&s, theta, r))).unwrap().unwrap();
            let obj = matching_objective(&s, theta, &got);
            prop_assert!(space.contains(&got));
            prop_assert!(obj <= best + 1e-12 * best.max(1.0), "{obj} vs {best}");
        }
    }

    #[test]
    fn profile_path_is_monotone(n in 4usize..30, s in scores(30)) {
        let s = ScoreVector::new(s.values()[..n].to_vec()).unwrap();
        let space = RankSpace::default_with_squares(n).unwrap();
        let (r, trace) = profile_ls_estimate(&s, &space, None, ProfileOptions::default()).unwrap();
        prop_assert!(space.contains(&r));
        prop_assert!(trace.objective_path.windows(2).all(|w| w[1] <= w[0]));
        let last = *trace.objective_path.last().unwrap();
        prop_assert!((profile_ls_objective(&s, &r).unwrap() - last).abs() <= 1e-9 * last.max(1.0));
    }
}
