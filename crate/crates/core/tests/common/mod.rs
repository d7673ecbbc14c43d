//! Slice-and-average reference implementations on data with a discrete `w`.
//! They never touch the kernel code: each group `{i : W_i = w}` is averaged
//! directly.

#![allow(dead_code)]

use dpdr_core::{Dataset, SlicePartition};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Classical moments of the group `W = w`.
pub struct GroupMoments {
    pub probs: Vec<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub slice_means: Vec<DVector<f64>>,
    pub slice_covs: Vec<DMatrix<f64>>,
}

fn mean_cov(rows: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mean = rows.iter().fold(DVector::zeros(p), |a, r| a + r) / n;
    let cov = rows
        .iter()
        .fold(DMatrix::zeros(p, p), |a, r| a + (r - &mean) * (r - &mean).transpose())
        / n;
    (mean, cov)
}

pub fn group_moments(data: &Dataset, part: &SlicePartition, w: f64) -> GroupMoments {
    let group: Vec<usize> = (0..data.n()).filter(|&i| data.w()[(i, 0)] == w).collect();
    let row = |i: usize| DVector::from_iterator(data.p(), data.x().row(i).iter().copied());
    let all: Vec<DVector<f64>> = group.iter().map(|&i| row(i)).collect();
    let (mean, cov) = mean_cov(&all);
    let mut probs = Vec::new();
    let mut slice_means = Vec::new();
    let mut slice_covs = Vec::new();
    for l in 0..part.n_slices() {
        let members: Vec<DVector<f64>> = group.iter().filter(|&&i| part.label(i) == l).map(|&i| row(i)).collect();
        probs.push(members.len() as f64 / group.len() as f64);
        let (m, c) = mean_cov(&members);
        slice_means.push(m);
        slice_covs.push(c);
    }
    GroupMoments {
        probs,
        mean,
        cov,
        slice_means,
        slice_covs,
    }
}

pub fn sir(g: &GroupMoments) -> DMatrix<f64> {
    let p = g.mean.len();
    let mut m = DMatrix::zeros(p, p);
    for (pl, ml) in g.probs.iter().zip(&g.slice_means) {
        let d = ml - &g.mean;
        m += &d * d.transpose() * *pl;
    }
    m
}

pub fn save(g: &GroupMoments) -> DMatrix<f64> {
    let p = g.mean.len();
    let mut m = DMatrix::zeros(p, p);
    for (pl, cl) in g.probs.iter().zip(&g.slice_covs) {
        let a = &g.cov - cl;
        m += &a * &a * *pl;
    }
    m
}

/// Directional regression through its pairwise definition
/// `Σ_{l,k} p_l p_k (2Σ − Σ_l − Σ_k − (m_l − m_k)(m_l − m_k)ᵀ)²`.
pub fn dr(g: &GroupMoments) -> DMatrix<f64> {
    let p = g.mean.len();
    let h = g.probs.len();
    let mut m = DMatrix::zeros(p, p);
    for l in 0..h {
        for k in 0..h {
            let d = &g.slice_means[l] - &g.slice_means[k];
            let a = &g.cov * 2.0 - &g.slice_covs[l] - &g.slice_covs[k] - &d * d.transpose();
            m += &a * &a * (g.probs[l] * g.probs[k]);
        }
    }
    m
}

/// 50 rows, `p = 3`, `W ∈ {0, 1, 2}`, three slices present in every group.
pub fn discrete_dataset(seed: u64) -> (Dataset, SlicePartition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 50;
    let w: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 3) as f64]).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let shift = (i % 3) as f64 * 0.5;
            (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0 + shift).collect()
        })
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| r[0] + 0.5 * r[1] * r[1] + 0.3 * rng.random::<f64>())
        .collect();
    let data = Dataset::from_rows(&y, &x, &w).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| (i / 3) % 3).collect();
    let part = SlicePartition::from_labels(labels, 3).unwrap();
    (data, part)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
