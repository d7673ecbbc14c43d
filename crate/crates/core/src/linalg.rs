//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{DpdrError, Result};

/// Relative ridge added to covariance estimates before inversion.
pub const ESTIMATOR_RIDGE: f64 = 1e-8;

/// Replaces `a` with `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut a: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut a);
    a
}

/// Cholesky factor of `sigma + eps I` with `eps = rel * trace(sigma) / p`.
pub fn ridge_cholesky(sigma: &DMatrix<f64>, rel: f64) -> Result<Cholesky<f64, Dyn>> {
    let p = sigma.nrows();
    let trace = sigma.trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(DpdrError::SingularCovariance);
    }
    let eps = rel * trace / p as f64;
    let mut reg = sigma.clone();
    for i in 0..p {
        reg[(i, i)] += eps;
    }
    Cholesky::new(reg).ok_or(DpdrError::SingularCovariance)
}

/// `log det` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Quadratic form `vᵀ A⁻¹ v` with `A = L Lᵀ`.
pub fn inv_quad_form(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(v)
        .expect("Cholesky factor has a positive diagonal");
    z.norm_squared()
}

/// Singular values in decreasing order with matching left singular vectors
/// as columns. Each vector is oriented so its largest-magnitude coordinate
/// is positive.
pub fn sorted_svd(g: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(DpdrError::Numerical("non-finite candidate matrix".into()));
    }
    let p = g.nrows();
    let svd = g.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| DpdrError::Numerical("SVD did not return U".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&k| svd.singular_values[k].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(p, order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).into_owned();
        orient(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Flips `v` so its largest-magnitude coordinate is positive. Exact ties in
/// magnitude resolve to the first such coordinate.
pub fn orient(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}
