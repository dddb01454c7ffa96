//! Small dense complex linear-algebra helpers shared across the crate.
//!
//! Everything here operates on `Array2<C64>` and wraps LAPACK-backed
//! routines from `ndarray-linalg`, with error mapping into [`crate::Error`].

use crate::{C64, Error, Result};
use ndarray::prelude::*;
use ndarray::concatenate;
use ndarray_linalg::{Eig, Eigh, Inverse, SVD, UPLO};

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Squared Frobenius norm, `trace(A A^H)`.
pub fn frobenius_sq(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Complex identity matrix.
pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

/// Horizontal concatenation of matrices sharing a row dimension.
pub fn hstack(mats: &[ArrayView2<C64>]) -> Array2<C64> {
    if mats.is_empty() {
        return Array2::zeros((0, 0));
    }
    concatenate(Axis(1), mats).expect("hstack: row dimensions must agree")
}

fn linalg_err(ctx: &str, err: ndarray_linalg::error::LinalgError) -> Error {
    Error::Conditioning(format!("{ctx}: {err}"))
}

/// Singular values in descending order.
pub fn singular_values(a: &Array2<C64>) -> Result<Vec<f64>> {
    let (_, s, _) = a.svd(false, false).map_err(|e| linalg_err("svd", e))?;
    let mut s: Vec<f64> = s.to_vec();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(s)
}

/// Numerical rank: number of singular values above `rel_tol` times the
/// largest one. An empty matrix has rank 0.
pub fn numerical_rank(a: &Array2<C64>, rel_tol: f64) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    let s = singular_values(a)?;
    let smax = s[0];
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(a: &Array2<C64>) -> Result<f64> {
    let s = singular_values(a)?;
    let (smax, smin) = (s[0], *s.last().unwrap());
    if smin == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

/// Inverse with a condition-number gate. Fails with a conditioning error
/// when `cond(A) > max_cond`.
pub fn inv_checked(a: &Array2<C64>, max_cond: f64, ctx: &str) -> Result<Array2<C64>> {
    let cond = condition_number(a)?;
    if !cond.is_finite() || cond > max_cond {
        return Err(Error::Conditioning(format!(
            "{ctx}: condition number {cond:.3e} exceeds {max_cond:.1e}"
        )));
    }
    a.inv().map_err(|e| linalg_err(ctx, e))
}

/// Plain inverse, mapping failures to a conditioning error.
pub fn inv(a: &Array2<C64>, ctx: &str) -> Result<Array2<C64>> {
    a.inv().map_err(|e| linalg_err(ctx, e))
}

/// Eigendecomposition of a general complex matrix with eigenpairs sorted by
/// descending eigenvalue magnitude. Eigenvector columns are unit-norm with a
/// canonical phase (largest-modulus entry made real positive) so repeated
/// runs on identical input produce identical output.
pub fn eig_desc(a: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let (vals, vecs) = a.eig().map_err(|e| linalg_err("eig", e))?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&p, &q| vals[q].norm().partial_cmp(&vals[p].norm()).unwrap());
    let mut sorted_vals = Vec::with_capacity(vals.len());
    let mut sorted_vecs = Array2::<C64>::zeros((n, vals.len()));
    for (col, &idx) in order.iter().enumerate() {
        sorted_vals.push(vals[idx]);
        let mut v = vecs.column(idx).to_owned();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.mapv_inplace(|z| z / norm);
        }
        // canonical phase
        let pivot = v
            .iter()
            .cloned()
            .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap())
            .unwrap_or_else(|| C64::new(1.0, 0.0));
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            v.mapv_inplace(|z| z * phase);
        }
        sorted_vecs.column_mut(col).assign(&v);
    }
    Ok((sorted_vals, sorted_vecs))
}

/// Hermitian eigendecomposition with eigenpairs sorted by descending
/// eigenvalue.
pub fn eigh_desc(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let (vals, vecs) = a.eigh(UPLO::Lower).map_err(|e| linalg_err("eigh", e))?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&p, &q| vals[q].partial_cmp(&vals[p]).unwrap());
    let mut sorted_vals = Vec::with_capacity(vals.len());
    let mut sorted_vecs = Array2::<C64>::zeros((n, vals.len()));
    for (col, &idx) in order.iter().enumerate() {
        sorted_vals.push(vals[idx]);
        sorted_vecs.column_mut(col).assign(&vecs.column(idx));
    }
    Ok((sorted_vals, sorted_vecs))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian(a: &Array2<C64>) -> Result<f64> {
    let (vals, _) = a.eigh(UPLO::Lower).map_err(|e| linalg_err("eigh", e))?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Best score of assigning one distinct row to every column of a
/// nonnegative score matrix, maximizing the sum of picked entries. Exact
/// search for up to 6 columns, greedy beyond that.
pub fn subassign_best_rows(scores: &Array2<f64>) -> f64 {
    let (rows, cols) = scores.dim();
    if cols == 0 || rows == 0 {
        return 0.0;
    }
    if cols <= 6 {
        fn dfs(scores: &Array2<f64>, col: usize, used: &mut Vec<bool>) -> f64 {
            if col == scores.ncols() {
                return 0.0;
            }
            let mut best = 0.0_f64;
            for r in 0..scores.nrows() {
                if used[r] {
                    continue;
                }
                used[r] = true;
                let v = scores[[r, col]] + dfs(scores, col + 1, used);
                used[r] = false;
                best = best.max(v);
            }
            best
        }
        let mut used = vec![false; rows];
        dfs(scores, 0, &mut used)
    } else {
        // greedy: largest entries first, skipping used rows/columns
        let mut entries: Vec<(f64, usize, usize)> = scores
            .indexed_iter()
            .map(|((r, c), &v)| (v, r, c))
            .collect();
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut used_r = vec![false; rows];
        let mut used_c = vec![false; cols];
        let mut total = 0.0;
        for (v, r, c) in entries {
            if !used_r[r] && !used_c[c] {
                used_r[r] = true;
                used_c[c] = true;
                total += v;
            }
        }
        total
    }
}
