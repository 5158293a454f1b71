//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Largest singular value of `a`, by power iteration on the smaller Gram
/// matrix (`a aᵀ` or `aᵀ a`).
///
/// Iterates until the Rayleigh quotient changes by less than `rel_tol`
/// relative, or `max_iter` is hit.
pub fn operator_norm(a: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    largest_eigenvalue_psd(&gram, rel_tol, max_iter).max(0.0).sqrt()
}

/// Dominant eigenvalue of a symmetric PSD matrix by power iteration.
pub fn largest_eigenvalue_psd(g: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let dim = g.nrows();
    if dim == 0 {
        return 0.0;
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    let norm = v.norm();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = g * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Sum of squared entries of `v`.
#[inline]
pub fn norm_squared(v: &DVector<f64>) -> f64 {
    v.norm_squared()
}

/// `true` when every entry is finite.
#[inline]
pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Converts a row-major nested list into a matrix with `cols` columns.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Option<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Row-major nested list view of a matrix.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
