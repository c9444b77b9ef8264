mod common;

use common::*;
use proptest::prelude::*;
use slsir::lasso::LassoOptions;
use slsir::numkit::{median, solve_spd, Matrix, SeededRng};
use slsir::simlab::{generate, make_truth, replicate, OutcomeModel, SimulationConfig};
use slsir::sir::{lasso_sir, support_of, SirOptions, SirTuning};
use slsir::twostage::*;

fn single_index(n: usize, p: usize, rng: &mut SeededRng) -> (Vec<f64>, Matrix) {
    let x = random_centered(n, p, rng);
    let y: Vec<f64> = (0..n).map(|i| (x[(i, 0)] - x[(i, 1)] + 0.3 * rng.normal()).exp()).collect();
    (y, x)
}

#[test]
fn self_instruments_give_identity() {
    let mut rng = SeededRng::new(4);
    let x = random_centered(60, 5, &mut rng);
    let s1 = stage_one(&x, &x, &StageOneTuning::Fixed(vec![0.0]), &LassoOptions::default()).unwrap();
    assert!(s1.gamma_hat.sub(&Matrix::identity(5)).max_abs() < 1e-9);
    assert!(s1.fitted.sub(&x).max_abs() < 1e-9);
}

#[test]
fn two_stage_lasso_without_penalties_is_ols() {
    let mut rng = SeededRng::new(5);
    let x = random_centered(80, 6, &mut rng);
    let mut y: Vec<f64> = (0..80).map(|i| x[(i, 2)] - 2.0 * x[(i, 4)] + rng.normal()).collect();
    slsir::numkit::center(&mut y);
    let fit = two_stage_lasso(
        &y,
        &x,
        &x,
        &StageOneTuning::Fixed(vec![0.0]),
        &SirTuning::Fixed(vec![0.0]),
        &LassoOptions::default(),
    )
    .unwrap();
    let ols = solve_spd(&x.gram(), &x.tr_mul_vec(&y)).unwrap();
    for (a, b) in fit.linear.fit.coefficients.iter().zip(&ols) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn stage_one_recovers_instruments() {
    let mut medians = Vec::new();
    for seed in 0..5 {
        let mut cfg = SimulationConfig::new(OutcomeModel::I, 500, 40, 40);
        cfg.seed = 40 + seed;
        let data = replicate(&cfg, 0).unwrap();
        let truth = data.truth.as_ref().unwrap();
        let s1 = stage_one(&data.x, &data.z, &StageOneTuning::Bic, &LassoOptions::default()).unwrap();
        let mut good = 0;
        for j in 0..40 {
            let found = s1.support(j);
            assert!((1..=15).contains(&found.len()), "column {j}: {} instruments", found.len());
            let truly: Vec<usize> = (0..40).filter(|&i| truth.gamma[(i, j)] != 0.0).collect();
            let hits = truly.iter().filter(|i| found.contains(i)).count();
            good += usize::from(hits >= 4);
        }
        medians.push(good as f64 / 40.0);
    }
    assert!(median(&medians) >= 0.8, "{medians:?}");
}

#[test]
fn unrelated_column_gets_no_instruments() {
    let seeds = 50;
    let mut empty = 0;
    for seed in 0..seeds {
        let mut rng = SeededRng::new(500 + seed);
        let z = random_centered(200, 20, &mut rng);
        let x = random_centered(200, 1, &mut rng);
        let s1 = stage_one(&x, &z, &StageOneTuning::Bic, &LassoOptions::default()).unwrap();
        empty += usize::from(s1.support(0).is_empty());
    }
    assert!(empty as f64 >= 0.9 * seeds as f64, "{empty}/{seeds}");
}

#[test]
fn single_index_dimension_is_one() {
    let mut cfg = SimulationConfig::new(OutcomeModel::I, 200, 40, 40);
    cfg.seed = 9;
    let truth = make_truth(&cfg, &mut SeededRng::new(1)).unwrap();
    let data = generate(&cfg, &truth, &mut SeededRng::new(2)).unwrap();
    let opts = DimensionOptions { repeats: 5, ..DimensionOptions::default() };
    let a = select_dimension(&data.y, &data.x, RegressorChoice::X, &opts, &mut SeededRng::new(3)).unwrap();
    let b = select_dimension(&data.y, &data.x, RegressorChoice::X, &opts, &mut SeededRng::new(3)).unwrap();
    assert_eq!(a.d_hat, 1);
    assert_eq!(a, b);
    assert_eq!(a.votes.len(), 5);
}

#[test]
fn stability_noise_variables_stay_below_half() {
    let mut rng = SeededRng::new(17);
    let (n, p) = (200, 40);
    let x = random_centered(n, p, &mut rng);
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] + x[(i, 1)] + 0.5 * rng.normal()).collect();
    let opts = StabilityOptions::default();
    let path = stability_selection(&y, &x, &x, StabilityEstimator::OneStage, &opts, &SeededRng::new(1)).unwrap();
    let noise: Vec<f64> = path.max_probability[2..].to_vec();
    let quiet = noise.iter().filter(|&&m| m < 0.5).count();
    assert!(quiet as f64 >= 0.95 * noise.len() as f64, "{quiet}/{}", noise.len());
    assert!(path.selected.contains(&0) && path.selected.contains(&1));
    assert!(path.probability[0].contains(&1.0));
    let again = stability_selection(&y, &x, &x, StabilityEstimator::OneStage, &opts, &SeededRng::new(1)).unwrap();
    assert_eq!(path, again);
}

#[test]
fn two_stage_stability_runs_on_instruments() {
    let mut cfg = SimulationConfig::new(OutcomeModel::I, 200, 20, 20);
    cfg.seed = 3;
    let data = replicate(&cfg, 0).unwrap();
    let truth = data.truth.as_ref().unwrap();
    let opts = StabilityOptions { subsamples: 20, ..StabilityOptions::default() };
    for est in [StabilityEstimator::TwoStage, StabilityEstimator::TwoStageLinear] {
        let path = stability_selection(&data.y, &data.x, &data.z, est, &opts, &SeededRng::new(2)).unwrap();
        assert_eq!(path.probability.len(), 20);
        assert!(path.probability.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        assert!(truth.support.iter().any(|j| path.selected.contains(j)));
    }
}

proptest! {
    #![proptest_config(config(30))]

    #[test]
    fn self_instrumented_two_stage_is_one_stage(n in 40usize..=120, p in 2usize..=10, seed in any::<u64>(), mu in 0.0f64..0.3) {
        let mut rng = SeededRng::new(seed);
        let (y, x) = single_index(n, p, &mut rng);
        let sir = SirOptions { tuning: SirTuning::Fixed(vec![mu]), ..SirOptions::default() };
        let one = lasso_sir(&y, &x, &sir);
        prop_assume!(one.is_ok());
        let one = one.unwrap();
        let opts = TwoStageOptions { stage_one: StageOneTuning::Fixed(vec![0.0]), sir };
        let two = two_stage_lasso_sir(&y, &x, &x, &opts).unwrap().estimate;
        let dist = one.b_hat.sub(&two.b_hat).frobenius_norm();
        prop_assert!(dist <= 1e-8, "distance {dist}");
        prop_assert_eq!(&two.support, &support_of(&two.b_hat));
    }
}
