//! Subspace and dependence metrics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{DpdrError, Result};

/// Trace correlation between two subspaces of equal dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubspaceDistance {
    pub r2: f64,
    pub d: usize,
}

fn orthonormal_basis(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = b.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if !(scale > 0.0) || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * scale) {
        return Err(DpdrError::InvalidArgument("basis is rank deficient".into()));
    }
    Ok(qr.q())
}

/// `r² = Tr(P₁ P₂) / d` with `P_i` the orthogonal projector onto
/// `span(B_i)`. Projectors come from thin QR factors, so
/// `Tr(P₁P₂) = ‖Q₁ᵀ Q₂‖²_F`.
pub fn trace_correlation(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<SubspaceDistance> {
    if b1.nrows() != b2.nrows() {
        return Err(DpdrError::InvalidArgument(format!(
            "bases live in R^{} and R^{}",
            b1.nrows(),
            b2.nrows()
        )));
    }
    if b1.ncols() != b2.ncols() {
        return Err(DpdrError::InvalidArgument(format!(
            "cannot compare dimensions {} and {}",
            b1.ncols(),
            b2.ncols()
        )));
    }
    let d = b1.ncols();
    if d == 0 || d > b1.nrows() {
        return Err(DpdrError::InvalidArgument(format!("invalid subspace dimension {d}")));
    }
    let q1 = orthonormal_basis(b1)?;
    let q2 = orthonormal_basis(b2)?;
    let r2 = (q1.transpose() * q2).norm_squared() / d as f64;
    Ok(SubspaceDistance { r2, d })
}

fn double_centered_distances(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (z.row(i) - z.row(j)).norm();
            a[(i, j)] = d;
            a[(j, i)] = d;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| a.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += grand - row_means[i] - row_means[j];
        }
    }
    a
}

/// Empirical distance correlation (V-statistic form) between the rows of
/// `u` (n×a) and `v` (n×b). Zero when either distance variance vanishes.
pub fn distance_correlation(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let n = u.nrows();
    if v.nrows() != n {
        return Err(DpdrError::InvalidArgument(format!(
            "sample counts differ: {n} vs {}",
            v.nrows()
        )));
    }
    if n < 4 {
        return Err(DpdrError::InvalidArgument(format!(
            "distance correlation needs n >= 4, got {n}"
        )));
    }
    let a = double_centered_distances(u);
    let b = double_centered_distances(v);
    let dcov2 = a.dot(&b);
    let dvar_u = a.norm_squared();
    let dvar_v = b.norm_squared();
    if dvar_u <= 0.0 || dvar_v <= 0.0 {
        return Ok(0.0);
    }
    let r2 = (dcov2 / (dvar_u * dvar_v).sqrt()).max(0.0);
    Ok(r2.sqrt().min(1.0))
}
