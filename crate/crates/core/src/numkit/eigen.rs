//! Symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration (the EISPACK `tred2`/`tql2` pair, as popularised by JAMA).
//! Both steps are backward stable, so residuals sit near machine precision
//! relative to `‖A‖_F`, comfortably inside the public contract below.

use super::{Matrix, NumError};

/// Relative tolerance on `|a_ij - a_ji|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Contract on `‖A v - λ v‖₂ / max(1, ‖A‖_F)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Contract on `|v_iᵀ v_j|` for `i ≠ j`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// `dim × k`; column `i` pairs with `values[i]`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.col(i)
    }
}

/// Computes the `k` largest eigenpairs of the symmetric matrix `a`.
///
/// Each returned vector is normalised and signed so that its largest
/// magnitude entry is positive (ties go to the lowest index).
pub fn sym_eigen(a: &Matrix, k: usize) -> Result<SymEigen, NumError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(NumError::DimensionMismatch {
            expected: format!("square matrix, got {}x{}", a.rows(), a.cols()),
        });
    }
    if k == 0 || k > n {
        return Err(NumError::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    a.check_finite()?;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(NumError::NonSymmetric { max_abs_diff: asym });
    }

    // Row-major working copy of the symmetrised input.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    // tql2 leaves eigenvalues ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(x.cmp(&y)));

    let mut values = Vec::with_capacity(k);
    let mut data = Vec::with_capacity(n * k);
    for &c in order.iter().take(k) {
        values.push(d[c]);
        let mut col: Vec<f64> = (0..n).map(|r| v[r * n + c]).collect();
        normalize_and_sign(&mut col);
        data.extend_from_slice(&col);
    }
    Ok(SymEigen {
        values,
        vectors: Matrix::from_col_major(n, k, data),
    })
}

/// Applies unit normalisation and the "largest entry positive" sign rule.
pub fn normalize_and_sign(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    // Near-equal magnitudes count as ties so the rule is stable under rounding.
    if let Some(lead) = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<(), NumError> {
    let idx = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is zero, so m < n always holds here.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 300 {
                    return Err(NumError::NoConvergence("tridiagonal QL"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[idx(k, i + 1)];
                        v[idx(k, i + 1)] = s * v[idx(k, i)] + c * h;
                        v[idx(k, i)] = c * v[idx(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Max over pairs of `‖A v - λ v‖₂ / max(1, ‖A‖_F)`.
pub fn max_relative_residual(a: &Matrix, eig: &SymEigen) -> f64 {
    let scale = a.frobenius_norm().max(1.0);
    (0..eig.len())
        .map(|i| {
            let v = eig.vector(i);
            let av = a.mul_vec(v);
            av.iter()
                .zip(v)
                .map(|(x, y)| (x - eig.values[i] * y).powi(2))
                .sum::<f64>()
                .sqrt()
                / scale
        })
        .fold(0.0, f64::max)
}

/// Max `|v_iᵀ v_j|` over distinct pairs.
pub fn max_orthogonality_defect(eig: &SymEigen) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..eig.len() {
        for j in 0..i {
            worst = worst.max(super::dot(eig.vector(i), eig.vector(j)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_closed_form() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = sym_eigen(&a, 2).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in eig.vector(0).iter().zip([s, s]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (got, want) in eig.vector(1).iter().zip([s, -s]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let a = Matrix::identity(4);
        let eig = sym_eigen(&a, 2).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0]);
        assert!(max_relative_residual(&a, &eig) < RESIDUAL_TOL);
        assert!(max_orthogonality_defect(&eig) < ORTHOGONALITY_TOL);
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(sym_eigen(&a, 1), Err(NumError::NonSymmetric { .. })));
        let b = Matrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]);
        assert!(matches!(sym_eigen(&b, 1), Err(NumError::NonFinite)));
        assert!(sym_eigen(&Matrix::identity(3), 4).is_err());
    }

    #[test]
    fn one_by_one() {
        let eig = sym_eigen(&Matrix::from_rows(&[vec![-2.5]]), 1).unwrap();
        assert_eq!(eig.values, vec![-2.5]);
        assert_eq!(eig.vector(0), &[1.0]);
    }
}
