//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use proptest::test_runner::{Config, RngSeed};
use slsir::numkit::{Matrix, SeededRng};
use slsir::sir::SliceDesign;

pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::from_col_major(rows, cols, data)
}

pub fn random_symmetric(n: usize, rng: &mut SeededRng) -> Matrix {
    let m = random_matrix(n, n, rng);
    let mut a = m.add(&m.transpose());
    a.scale_in_place(0.5);
    a
}

pub fn random_centered(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    random_matrix(rows, cols, rng).centered()
}

pub fn centered_vec(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let m = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

/// Random orthogonal matrix from Householder reflections.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Matrix {
    let mut q = Matrix::identity(n);
    for _ in 0..n {
        let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let mut h = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= 2.0 * v[i] * v[j] / vv;
            }
        }
        q = q.matmul(&h);
    }
    q
}

/// Dense `D = I − blockdiag(c_h/(c_h−1)·(I − J/c_h))`.
pub fn explicit_d(slices: &SliceDesign) -> Matrix {
    let n = slices.n();
    let mut d = Matrix::identity(n);
    for m in &slices.members {
        let c = m.len() as f64;
        let a = c / (c - 1.0);
        for &i in m {
            for &j in m {
                let centering = if i == j { 1.0 - 1.0 / c } else { -1.0 / c };
                d[(i, j)] -= a * centering;
            }
        }
    }
    d
}

/// `Σ̂ − Σ_h c_h/((c_h−1)n) Σ_{i∈h} (x_i − x̄_h)(x_i − x̄_h)ᵀ`.
pub fn slice_mean_kernel(x: &Matrix, slices: &SliceDesign) -> Matrix {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut out = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let total: f64 = (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum::<f64>() / nf;
            let mut within = 0.0;
            for m in &slices.members {
                let c = m.len() as f64;
                let ma = m.iter().map(|&i| x[(i, a)]).sum::<f64>() / c;
                let mb = m.iter().map(|&i| x[(i, b)]).sum::<f64>() / c;
                let s: f64 = m.iter().map(|&i| (x[(i, a)] - ma) * (x[(i, b)] - mb)).sum();
                within += c / (c - 1.0) * s / nf;
            }
            out[(a, b)] = total - within;
        }
    }
    out
}

/// Slicing with arbitrary sizes, built directly from a permutation.
pub fn slices_from_sizes(order: &[usize], sizes: &[usize]) -> SliceDesign {
    let n = order.len();
    let mut assignment = vec![0; n];
    let mut members = Vec::new();
    let mut start = 0;
    for (s, &c) in sizes.iter().enumerate() {
        let m = order[start..start + c].to_vec();
        for &i in &m {
            assignment[i] = s;
        }
        members.push(m);
        start += c;
    }
    SliceDesign {
        slices: sizes.len(),
        assignment,
        sizes: sizes.to_vec(),
        members,
    }
}

pub fn lasso_objective(x: &Matrix, y: &[f64], beta: &[f64], mu: f64) -> f64 {
    let n = x.rows();
    let fitted = x.mul_vec(beta);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    rss / (2.0 * n as f64) + mu * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the lasso optimality conditions at `beta`.
pub fn kkt_violation(x: &Matrix, y: &[f64], beta: &[f64], mu: f64) -> f64 {
    let n = x.rows() as f64;
    let fitted = x.mul_vec(beta);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let mut worst = 0.0_f64;
    for (j, &b) in beta.iter().enumerate() {
        let g: f64 = x.col(j).iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n;
        let v = if b == 0.0 {
            (g.abs() - mu).max(0.0)
        } else {
            (g - mu * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Grid refinement over a box known to contain the minimiser.
pub fn brute_force_lasso(x: &Matrix, y: &[f64], mu: f64) -> (Vec<f64>, f64) {
    let m = x.cols();
    let n = x.rows() as f64;
    let f0 = y.iter().map(|v| v * v).sum::<f64>() / (2.0 * n);
    let radius = if mu > 0.0 { f0 / mu } else { 1e3 };
    let mut center = vec![0.0; m];
    let mut half = radius;
    let steps: i64 = 10;
    let mut best = (center.clone(), lasso_objective(x, y, &center, mu));
    for _ in 0..80 {
        let h = half / steps as f64;
        let total = (2 * steps + 1).pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let mut beta = center.clone();
            for b in beta.iter_mut() {
                let k = c % (2 * steps + 1) - steps;
                c /= 2 * steps + 1;
                *b += k as f64 * h;
            }
            let f = lasso_objective(x, y, &beta, mu);
            if f < best.1 {
                best = (beta, f);
            }
        }
        center = best.0.clone();
        half = 2.0 * h;
    }
    best
}

/// AUC by counting every case/control pair, ties as one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// Eigenvalues (descending) as sign changes of `det(A − λI)`, refined by
/// bisection. Assumes simple eigenvalues separated by more than the scan
/// step.
pub fn charpoly_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let bound = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let shifted = |lam: f64| {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] -= lam;
        }
        determinant(&b)
    };
    let scan = 20_000;
    let mut roots = Vec::new();
    let mut prev_x = bound;
    let mut prev_f = shifted(prev_x);
    for s in 1..=scan {
        let xk = bound - 2.0 * bound * s as f64 / scan as f64;
        let fk = shifted(xk);
        if fk == 0.0 || fk.signum() != prev_f.signum() {
            let (mut hi, mut lo) = (prev_x, xk);
            let f_hi = prev_f;
            for _ in 0..200 {
                let mid = 0.5 * (hi + lo);
                if shifted(mid).signum() == f_hi.signum() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (hi + lo));
        }
        prev_x = xk;
        prev_f = fk;
    }
    roots
}
