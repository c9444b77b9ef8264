use super::{dot, sym_eigen, Matrix, NumError};

/// Residual norms below this mark a column as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix, NumError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(NumError::DimensionMismatch {
            expected: format!("square matrix, got {}x{}", a.rows(), a.cols()),
        });
    }
    a.check_finite()?;
    // Column j of `u` holds row j of the factor, so inner products are contiguous.
    let mut u = Matrix::zeros(n, n);
    for j in 0..n {
        let (done, rest) = u.as_mut_slice().split_at_mut(j * n);
        let uj = &mut rest[..n];
        for i in 0..j {
            let ui = &done[i * n..i * n + i];
            let s = a[(j, i)] - dot(ui, &uj[..i]);
            uj[i] = s / done[i * n + i];
        }
        let diag = a[(j, j)] - dot(&uj[..j], &uj[..j]);
        if diag <= 0.0 || !diag.is_finite() {
            return Err(NumError::NotPositiveDefinite { pivot: j });
        }
        uj[j] = diag.sqrt();
    }
    Ok(u.transpose())
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for k in 0..n {
        let col = l.col(k);
        y[k] /= col[k];
        let yk = y[k];
        for (yi, lik) in y[k + 1..].iter_mut().zip(&col[k + 1..]) {
            *yi -= lik * yk;
        }
    }
    for i in (0..n).rev() {
        let col = l.col(i);
        let s = y[i] - dot(&col[i + 1..], &y[i + 1..]);
        y[i] = s / col[i];
    }
    y
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumError> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Orthonormalises the columns left to right (modified Gram–Schmidt with
/// one re-orthogonalisation pass). The first column keeps its direction.
pub fn gram_schmidt(cols: &Matrix) -> Result<Matrix, NumError> {
    cols.check_finite()?;
    let mut q = cols.clone();
    for j in 0..q.cols() {
        let original = crate::numkit::norm2(cols.col(j));
        for _pass in 0..2 {
            for k in 0..j {
                let proj = dot(q.col(k), q.col(j));
                let (qk, qj) = split_cols(&mut q, k, j);
                for (x, y) in qj.iter_mut().zip(qk.iter()) {
                    *x -= proj * y;
                }
            }
        }
        let norm = crate::numkit::norm2(q.col(j));
        if norm < RANK_TOL * original.max(1.0) {
            return Err(NumError::RankDeficient { column: j });
        }
        q.col_mut(j).iter_mut().for_each(|x| *x /= norm);
    }
    Ok(q)
}

fn split_cols(m: &mut Matrix, k: usize, j: usize) -> (Vec<f64>, &mut [f64]) {
    debug_assert!(k < j);
    let qk = m.col(k).to_vec();
    (qk, m.col_mut(j))
}

/// Orthogonal projector onto the column space of `b`,
/// `B (BᵀB)⁺ Bᵀ`. An all-zero matrix projects to zero.
pub fn projection_matrix(b: &Matrix) -> Result<Matrix, NumError> {
    b.check_finite()?;
    let p = b.rows();
    let d = b.cols();
    let gram = b.gram();
    if d == 0 || gram.max_abs() == 0.0 {
        return Ok(Matrix::zeros(p, p));
    }
    let eig = sym_eigen(&gram, d)?;
    let top = eig.values[0].max(0.0);
    // Orthonormal basis of col(B): u_i = B v_i / sqrt(σ_i) for retained σ_i.
    let mut basis = Vec::new();
    for (i, &s) in eig.values.iter().enumerate() {
        if s > 1e-12 * top && s > 0.0 {
            let mut u = b.mul_vec(eig.vector(i));
            let sn = s.sqrt();
            u.iter_mut().for_each(|x| *x /= sn);
            basis.push(u);
        }
    }
    let mut proj = Matrix::zeros(p, p);
    for u in &basis {
        for j in 0..p {
            if u[j] == 0.0 {
                continue;
            }
            let col = proj.col_mut(j);
            for (i, c) in col.iter_mut().enumerate() {
                *c += u[i] * u[j];
            }
        }
    }
    Ok(proj)
}
