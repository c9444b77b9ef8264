mod common;

use common::*;
use proptest::prelude::*;
use slsir::numkit::{cholesky, dot, gram_schmidt, Matrix, SeededRng};
use slsir::simlab::appendix::{run_appendix, Link, Scenario};
use slsir::simlab::*;

fn config(model: OutcomeModel, n: usize, seed: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(model, n, 40, 40);
    cfg.seed = seed;
    cfg
}

fn covariance(cols: &[&[f64]]) -> Matrix {
    let n = cols[0].len() as f64;
    let k = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut out = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            out[(a, b)] = cols[a]
                .iter()
                .zip(cols[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum::<f64>()
                / n;
        }
    }
    out
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let c = covariance(&[a, b]);
    c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt()
}

#[test]
fn truths_are_spd_or_rejected() {
    for model in OutcomeModel::ALL {
        for (p, q) in [(40, 40), (10, 10), (40, 5)] {
            for seed in 0..30 {
                let mut cfg = SimulationConfig::new(model, 50, p, q);
                cfg.r = cfg.r.min(q);
                match make_truth(&cfg, &mut SeededRng::new(seed)) {
                    Ok(t) => {
                        assert!(cholesky(&t.sigma).is_ok());
                        assert!(t.attempts >= 1 && t.attempts <= PD_RETRIES);
                        assert_eq!(t.sigma.max_asymmetry(), 0.0);
                    }
                    Err(e) => assert!(matches!(e, SimError::CannotAchievePD { .. }), "{e}"),
                }
            }
        }
    }
}

#[test]
fn two_index_truths_are_orthonormal() {
    for seed in 0..20 {
        let t = make_truth(&config(OutcomeModel::IV, 200, 0), &mut SeededRng::new(seed)).unwrap();
        assert!(dot(t.b.col(0), t.b.col(1)).abs() < 1e-10);
        let support_rows = t.b.select_rows(&t.support);
        assert!(gram_schmidt(&support_rows).is_ok());
        assert!((0..40).filter(|i| !t.support.contains(i)).all(|i| t.b[(i, 0)] == 0.0 && t.b[(i, 1)] == 0.0));
    }
}

#[test]
fn endogeneity_points_outside_the_index_space() {
    for model in OutcomeModel::ALL {
        for seed in 0..20 {
            let t = make_truth(&config(model, 200, 0), &mut SeededRng::new(seed)).unwrap();
            for kind in [InstrumentKind::Normal, InstrumentKind::Bernoulli] {
                assert!(t.endogeneity_angle(kind).unwrap() > 1e-3);
            }
        }
    }
}

#[test]
fn noiseless_outcomes() {
    let idx = [0.7, -0.4];
    assert_eq!(outcome(OutcomeModel::I, &idx, 0.0), 0.7);
    assert_eq!(outcome(OutcomeModel::II, &idx, 0.0), 0.7_f64.exp());
    assert_eq!(outcome(OutcomeModel::III, &idx, 0.0), 0.7_f64.sinh());
    assert_eq!(outcome(OutcomeModel::IV, &idx, 0.0), -0.4 * 0.7_f64.exp());
    assert_eq!(outcome(OutcomeModel::V, &idx, 0.0), 0.7_f64.exp() / 1.1);
}

/// Mean and max of `|S_ab − Σ_ab| / sd(S_ab)` with the Gaussian
/// `sd(S_ab) = √((Σ_aa Σ_bb + Σ_ab²)/n)`.
fn standardized_deviation(sample: &Matrix, truth: &Matrix, n: usize) -> (f64, f64) {
    let k = truth.rows();
    let mut zs = Vec::new();
    for a in 0..k {
        for b in 0..=a {
            let sd = ((truth[(a, a)] * truth[(b, b)] + truth[(a, b)].powi(2)) / n as f64).sqrt();
            zs.push((sample[(a, b)] - truth[(a, b)]).abs() / sd);
        }
    }
    (zs.iter().sum::<f64>() / zs.len() as f64, zs.iter().cloned().fold(0.0, f64::max))
}

#[test]
fn generated_moments_match_the_truth() {
    let n = 5000;
    let cfg = config(OutcomeModel::I, n, 0);
    let truth = make_truth(&cfg, &mut SeededRng::new(21)).unwrap();
    let data = generate(&cfg, &truth, &mut SeededRng::new(22)).unwrap();
    let zc: Vec<&[f64]> = data.z.columns().collect();
    let (mean_z, max_z) = standardized_deviation(&covariance(&zc), &Matrix::identity(40), n);
    assert!((mean_z - 0.798).abs() < 0.1 && max_z < 5.0, "{mean_z} {max_z}");

    // U = X − ZΓ and ε = y − Xβ₁ for the linear model.
    let u = data.x.sub(&data.z.matmul(&truth.gamma));
    let eps: Vec<f64> = data.y.iter().zip(data.x.mul_vec(truth.b.col(0))).map(|(a, b)| a - b).collect();
    let mut cols: Vec<&[f64]> = u.columns().collect();
    cols.push(&eps);
    let (mean_u, max_u) = standardized_deviation(&covariance(&cols), &truth.sigma, n);
    assert!((mean_u - 0.798).abs() < 0.1 && max_u < 5.0, "{mean_u} {max_u}");
}

#[test]
fn bernoulli_instruments_are_centered_binary() {
    let mut cfg = config(OutcomeModel::II, 400, 1);
    cfg.z_kind = InstrumentKind::Bernoulli;
    let data = replicate(&cfg, 0).unwrap();
    for c in data.z.columns() {
        let m = c.iter().sum::<f64>() / c.len() as f64;
        assert!(m.abs() < 1e-12);
        let mut levels: Vec<f64> = c.to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert!(levels.len() <= 2);
    }
}

#[test]
fn replicate_streams_are_reproducible_and_independent() {
    let cfg = config(OutcomeModel::I, 200, 4);
    let a = replicate(&cfg, 3).unwrap();
    let b = replicate(&cfg, 3).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.x, b.x);
    assert_eq!(a.z, b.z);
    let corr: Vec<f64> = (0..100)
        .map(|i| {
            let u = replicate(&cfg, 2 * i).unwrap();
            let v = replicate(&cfg, 2 * i + 1).unwrap();
            correlation(u.x.col(0), v.x.col(0))
        })
        .collect();
    let mean = corr.iter().sum::<f64>() / corr.len() as f64;
    assert!(mean.abs() <= 0.1, "{mean}");
}

#[test]
fn experiments_are_deterministic() {
    let cfg = config(OutcomeModel::II, 200, 9);
    let opts = ExperimentOptions::default();
    let a = run_experiment(&cfg, &Estimator::ALL, 2, &opts).unwrap();
    let b = run_experiment(&cfg, &Estimator::ALL, 2, &opts).unwrap();
    assert_eq!(a.summaries, b.summaries);
    let strip = |r: &ExperimentResult| -> Vec<(Estimator, u64, Option<f64>)> {
        r.records.iter().map(|x| (x.estimator, x.replicate, x.error)).collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert!(run_experiment(&cfg, &Estimator::ALL, 0, &opts).is_err());
    let mut bad = cfg.clone();
    bad.p = 7;
    assert!(matches!(run_experiment(&bad, &Estimator::ALL, 1, &opts), Err(SimError::InvalidConfig(_))));
}

#[test]
fn estimator_ordering_for_the_linear_model() {
    let res = run_experiment(&config(OutcomeModel::I, 200, 7), &Estimator::ALL, 20, &ExperimentOptions::default()).unwrap();
    let err: Vec<f64> = res.summaries.iter().map(|s| s.mean_error).collect();
    assert!(res.summaries.iter().all(|s| s.failures == 0));
    assert!(err[0] > err[1] && err[1] > err[2] && err[2] > err[3], "{err:?}");
}

#[test]
fn same_support_endogeneity_breaks_estimation_not_selection() {
    let s = run_appendix(Scenario::SameSupport, Link::Linear, 1000, 100, 11).unwrap().summary;
    assert!((s.mean_error - 0.639).abs() <= 0.05, "{}", s.mean_error);
    assert!(s.mean_auc_fixed >= 0.995);
}

#[test]
fn misaligned_endogeneity_is_worse_at_every_size() {
    for n in [100, 500, 1000] {
        let good = run_appendix(Scenario::Aligned, Link::Linear, n, 100, 5).unwrap().summary;
        let bad = run_appendix(Scenario::Misaligned, Link::Linear, n, 100, 5).unwrap().summary;
        assert!(bad.mean_error > good.mean_error, "n={n}");
    }
}

proptest! {
    #![proptest_config(common::config(100))]

    #[test]
    fn projection_error_properties(p in 2usize..=15, d in 1usize..=3, seed in any::<u64>()) {
        prop_assume!(d < p);
        let mut rng = SeededRng::new(seed);
        let a = random_matrix(p, d, &mut rng);
        let b = random_matrix(p, d, &mut rng);
        let m = random_matrix(d, d, &mut rng).add(&Matrix::identity(d).scaled(2.0));
        let e = projection_error(&a, &b).unwrap();
        prop_assert!((e - projection_error(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(e >= 0.0 && e <= (2.0 * d as f64).sqrt() + 1e-12);
        prop_assert!(projection_error(&a, &a).unwrap() < 1e-10);
        prop_assert!(projection_error(&a.matmul(&m), &a).unwrap() <= 1e-10);
        prop_assert!((projection_error(&a.matmul(&m), &b).unwrap() - e).abs() <= 1e-10);
    }

    #[test]
    fn selection_auc_is_pairwise(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let b = random_matrix(40, 2, &mut rng);
        let support = rng.sample_without_replacement(40, 5);
        let mut labels = vec![false; 40];
        support.iter().for_each(|&j| labels[j] = true);
        let got = selection_auc(&b, &support).unwrap();
        prop_assert_eq!(got, pairwise_auc(&row_scores(&b), &labels));
        prop_assert_eq!(selection_auc(&Matrix::zeros(40, 2), &support).unwrap(), 0.5);
        let mut perfect = Matrix::zeros(40, 1);
        support.iter().for_each(|&j| perfect[(j, 0)] = 1.0);
        prop_assert_eq!(selection_auc(&perfect, &support).unwrap(), 1.0);
    }
}
