mod common;

use common::*;
use slsir::lasso::{solve, CovSystem, LassoOptions, LassoProblem, KKT_TOL};
use slsir::numkit::{cholesky, mann_whitney_auc, sym_eigen, Matrix, SeededRng};
use slsir::simlab::appendix::{run_appendix, Link, Scenario};
use slsir::simlab::*;
use slsir::sir::{kernel, lasso_sir, SirOptions, SirTuning};
use slsir::twostage::*;
use std::io::Write;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn table_config(model: OutcomeModel, n: usize, p: usize, seed: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(model, n, p, p);
    cfg.seed = seed;
    cfg
}

fn criterion_1() -> Outcome {
    let reps = 500;
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, target) in [(100, 0.095), (500, 0.039), (1000, 0.028)] {
        let s = run_appendix(Scenario::Aligned, Link::Linear, n, reps, 11).unwrap().summary;
        pass &= within(s.mean_error, target, 0.02) && within(s.mean_auc_fixed, 1.0, 0.005);
        detail.push(format!("I n={n} err={:.4} auc={:.4}", s.mean_error, s.mean_auc_fixed));
    }
    let s = run_appendix(Scenario::Misaligned, Link::Linear, 1000, reps, 11).unwrap().summary;
    pass &= within(s.mean_error, 1.0, 0.05) && within(s.mean_auc_auto, 0.728, 0.05);
    detail.push(format!(
        "III n=1000 err={:.4} auc={:.4} (fixed orientation {:.4})",
        s.mean_error, s.mean_auc_auto, s.mean_auc_fixed
    ));
    Outcome { pass, detail: detail.join("; ") }
}

fn criterion_2() -> Outcome {
    let opts = ExperimentOptions::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for model in [OutcomeModel::I, OutcomeModel::II, OutcomeModel::III] {
        let res = run_experiment(&table_config(model, 200, 40, 7), &Estimator::ALL, 100, &opts).unwrap();
        let get = |e: Estimator| res.summaries.iter().find(|s| s.estimator == e).unwrap();
        let two = get(Estimator::TwoStageLsir);
        pass &= within(two.mean_error, 0.18, 0.05) && two.mean_auc >= 0.99 && two.failures == 0;
        if model != OutcomeModel::III {
            pass &= within(get(Estimator::Lsir).mean_error, 0.47, 0.07);
        }
        if model == OutcomeModel::II {
            pass &= get(Estimator::TwoStageLasso).mean_error >= 0.9;
        }
        let errs: Vec<String> = res
            .summaries
            .iter()
            .map(|s| format!("{}={:.3}", serde_plain(s.estimator), s.mean_error))
            .collect();
        detail.push(format!("({model}) {} 2slsir-auc={:.3}", errs.join(" "), two.mean_auc));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn serde_plain(e: Estimator) -> &'static str {
    match e {
        Estimator::Lasso => "lasso",
        Estimator::Lsir => "lsir",
        Estimator::TwoStageLasso => "2slasso",
        Estimator::TwoStageLsir => "2slsir",
    }
}

fn criterion_3() -> Outcome {
    let opts = ExperimentOptions::default();
    let reps = 100;
    let mut pass = true;
    let mut detail = Vec::new();
    for model in OutcomeModel::ALL {
        let run = |n| run_experiment(&table_config(model, n, 40, 3), &[Estimator::TwoStageLsir], reps, &opts).unwrap();
        let (small, large) = (run(200), run(500));
        let (a, b) = (small.summaries[0].mean_error, large.summaries[0].mean_error);
        pass &= b < a;
        let paired = small
            .records
            .iter()
            .zip(&large.records)
            .filter(|(s, l)| s.replicate == l.replicate && matches!((s.error, l.error), (Some(x), Some(y)) if y < x))
            .count();
        detail.push(format!("({model}) {a:.3} -> {b:.3} paired {paired}/{reps}"));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn criterion_4() -> Outcome {
    let cfg = SimulationConfig::new(OutcomeModel::II, 200, 500, 500);
    let res = run_experiment(&cfg, &[Estimator::Lsir, Estimator::TwoStageLsir], 50, &ExperimentOptions::default()).unwrap();
    let (one, two) = (&res.summaries[0], &res.summaries[1]);
    let pass = within(two.mean_error, 0.21, 0.07) && two.mean_auc >= 0.95 && one.mean_error >= 0.30;
    Outcome {
        pass,
        detail: format!(
            "2slsir err={:.3} auc={:.3}; lsir err={:.3}",
            two.mean_error, two.mean_auc, one.mean_error
        ),
    }
}

fn dimension_rates(model: OutcomeModel, reps: u64, choices: &[RegressorChoice]) -> Vec<f64> {
    let cfg = table_config(model, 200, 40, 5);
    let mut hits = vec![0usize; choices.len()];
    for i in 0..reps {
        let data = replicate(&cfg, i).unwrap();
        let s1 = stage_one(&data.x, &data.z, &StageOneTuning::Bic, &LassoOptions::default()).unwrap();
        for (c, &choice) in choices.iter().enumerate() {
            let m = match choice {
                RegressorChoice::Z => &data.z,
                RegressorChoice::X => &data.x,
                RegressorChoice::Xhat => &s1.fitted,
            };
            let mut rng = SeededRng::new(cfg.seed).child(i).child(10 + c as u64);
            let vote = select_dimension(&data.y, m, choice, &DimensionOptions::default(), &mut rng).unwrap();
            hits[c] += usize::from(vote.d_hat == model.dimension());
        }
    }
    hits.iter().map(|&h| h as f64 / reps as f64).collect()
}

fn criterion_5() -> Outcome {
    let all = [RegressorChoice::Z, RegressorChoice::X, RegressorChoice::Xhat];
    let one = dimension_rates(OutcomeModel::I, 100, &all);
    let two = dimension_rates(OutcomeModel::IV, 100, &[RegressorChoice::X]);
    let pass = one.iter().all(|&r| r >= 0.95) && within(two[0], 0.93, 0.15);
    Outcome {
        pass,
        detail: format!(
            "(i) d=1 Z/X/Xhat = {:.2}/{:.2}/{:.2} over 100; (iv) d=2 X = {:.3} over 100",
            one[0], one[1], one[2], two[0]
        ),
    }
}

fn lasso_data(n: usize, m: usize, rng: &mut SeededRng) -> (Matrix, Vec<f64>) {
    let x = random_centered(n, m, rng);
    let mut y: Vec<f64> = (0..n).map(|i| (0..m.min(3)).map(|j| (j + 1) as f64 * x[(i, j)]).sum::<f64>() + rng.normal()).collect();
    slsir::numkit::center(&mut y);
    (x, y)
}

fn criterion_6() -> Outcome {
    let mut rng = SeededRng::new(6);
    let mut fails = Vec::new();
    let opts = LassoOptions::default();

    let mut worst_kkt = 0.0_f64;
    for _ in 0..200 {
        let (n, m) = (5 + rng.below(36), 1 + rng.below(30));
        let (x, y) = lasso_data(n, m, &mut rng);
        let mu = (0.01 + rng.uniform()) * CovSystem::from_data(&x, &y).max_penalty();
        let fit = solve(&LassoProblem::new(&x, &y, mu).unwrap(), None, &opts).unwrap();
        worst_kkt = worst_kkt.max(fit.kkt_residual).max(kkt_violation(&x, &y, &fit.coefficients, mu));
    }
    if worst_kkt > KKT_TOL {
        fails.push(format!("kkt {worst_kkt:e}"));
    }

    let mut worst_kernel = 0.0_f64;
    for _ in 0..100 {
        let n = 4 + rng.below(57);
        let p = 1 + rng.below(6);
        let h = 1 + rng.below(n / 2);
        let mut sizes = vec![2; h];
        for _ in 0..n - 2 * h {
            sizes[rng.below(h)] += 1;
        }
        let s = slices_from_sizes(&rng.permutation(n), &sizes);
        let x = random_centered(n, p, &mut rng);
        let k = kernel(&x, &s).unwrap();
        let mut direct = x.tr_matmul(&explicit_d(&s).matmul(&x));
        direct.scale_in_place(1.0 / n as f64);
        let scale = direct.max_abs().max(1.0);
        let means = slice_mean_kernel(&x, &s);
        worst_kernel = worst_kernel
            .max(k.lambda_hat.sub(&direct).max_abs() / scale)
            .max(k.lambda_hat.sub(&means).max_abs() / scale);
    }
    if worst_kernel > 1e-10 {
        fails.push(format!("kernel {worst_kernel:e}"));
    }

    let mut worst_reduction = 0.0_f64;
    for _ in 0..20 {
        let (n, p) = (40 + rng.below(81), 2 + rng.below(9));
        let x = random_centered(n, p, &mut rng);
        let y: Vec<f64> = (0..n).map(|i| (x[(i, 0)] - x[(i, 1)] + 0.3 * rng.normal()).exp()).collect();
        let sir = SirOptions { tuning: SirTuning::Fixed(vec![0.3 * rng.uniform()]), ..SirOptions::default() };
        let Ok(one) = lasso_sir(&y, &x, &sir) else { continue };
        let opts = TwoStageOptions { stage_one: StageOneTuning::Fixed(vec![0.0]), sir };
        let two = two_stage_lasso_sir(&y, &x, &x, &opts).unwrap().estimate;
        worst_reduction = worst_reduction.max(one.b_hat.sub(&two.b_hat).frobenius_norm());
    }
    if worst_reduction > 1e-8 {
        fails.push(format!("reduction {worst_reduction:e}"));
    }

    let mut worst_invariance = 0.0_f64;
    for _ in 0..100 {
        let p = 2 + rng.below(14);
        let d = 1 + rng.below(p.min(4) - 1);
        let a = random_matrix(p, d, &mut rng);
        let b = random_matrix(p, d, &mut rng);
        let m = random_matrix(d, d, &mut rng).add(&Matrix::identity(d).scaled(2.0));
        let e = projection_error(&a, &b).unwrap();
        worst_invariance = worst_invariance.max((projection_error(&a.matmul(&m), &b).unwrap() - e).abs());
    }
    if worst_invariance > 1e-10 {
        fails.push(format!("projection {worst_invariance:e}"));
    }

    let mut worst_eigen = 0.0_f64;
    for _ in 0..100 {
        let n = 1 + rng.below(50);
        let a = random_symmetric(n, &mut rng);
        let eig = sym_eigen(&a, n).unwrap();
        let scale = a.frobenius_norm();
        for i in 0..n {
            let v = eig.vector(i);
            let r: f64 = a.mul_vec(v).iter().zip(v).map(|(x, y)| (x - eig.values[i] * y).powi(2)).sum::<f64>().sqrt();
            worst_eigen = worst_eigen.max(r / scale);
        }
    }
    if worst_eigen > 1e-10 {
        fails.push(format!("eigen {worst_eigen:e}"));
    }

    let mut worst_brute = 0.0_f64;
    for _ in 0..60 {
        let (n, m) = (4 + rng.below(17), 1 + rng.below(3));
        let (x, y) = lasso_data(n, m, &mut rng);
        let mu = (0.02 + 0.88 * rng.uniform()) * CovSystem::from_data(&x, &y).max_penalty();
        let fit = solve(&LassoProblem::new(&x, &y, mu).unwrap(), None, &opts).unwrap();
        let (_, brute) = brute_force_lasso(&x, &y, mu);
        worst_brute = worst_brute.max((lasso_objective(&x, &y, &fit.coefficients, mu) - brute).abs());
    }
    if worst_brute > 1e-4 {
        fails.push(format!("brute force {worst_brute:e}"));
    }

    let mut worst_auc = 0.0_f64;
    for _ in 0..200 {
        let n = 2 + rng.below(11);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        rng.shuffle(&mut labels);
        let levels = 1 + rng.below(6);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels + 1) as f64).collect();
        worst_auc = worst_auc.max((mann_whitney_auc(&scores, &labels).unwrap() - pairwise_auc(&scores, &labels)).abs());
    }
    if worst_auc > 1e-15 {
        fails.push(format!("auc {worst_auc:e}"));
    }

    Outcome {
        pass: fails.is_empty(),
        detail: if fails.is_empty() {
            format!(
                "kkt {worst_kkt:.1e}, kernel {worst_kernel:.1e}, reduction {worst_reduction:.1e}, projection {worst_invariance:.1e}, eigen {worst_eigen:.1e}, brute {worst_brute:.1e}, auc {worst_auc:.1e}"
            )
        } else {
            fails.join(", ")
        },
    }
}

fn criterion_7() -> Outcome {
    let mut min_angle = f64::INFINITY;
    let mut spd = true;
    let mut truths = 0;
    for model in OutcomeModel::ALL {
        for seed in 0..20 {
            let t = make_truth(&table_config(model, 200, 40, 0), &mut SeededRng::new(seed)).unwrap();
            spd &= cholesky(&t.sigma).is_ok();
            for kind in [InstrumentKind::Normal, InstrumentKind::Bernoulli] {
                min_angle = min_angle.min(t.endogeneity_angle(kind).unwrap());
            }
            truths += 1;
        }
    }
    Outcome {
        pass: spd && min_angle > 1e-3,
        detail: format!("{truths} truths, all SPD: {spd}, smallest angle {min_angle:.4} rad"),
    }
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("SLSIR_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let criteria: [(usize, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        // The raw handle bypasses the harness capture.
        let line = format!("criterion {id}: {verdict} ({:.0}s) {}", start.elapsed().as_secs_f64(), out.detail);
        writeln!(std::io::stderr(), "{line}").unwrap();
        if !out.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
