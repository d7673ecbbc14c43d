//! Ladle estimation of the structural dimension at a query point.
//!
//! The ladle objective `g(k) = f(k) + φ(k)` combines a bootstrap measure of
//! how much the leading `k` directions wobble (`f`) with the normalised
//! singular value just past them (`φ`). Both terms are small only near the
//! true dimension.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::data::{Dataset, SlicePartition};
use crate::error::{DpdrError, Result};
use crate::kernel::{ConditionalMoments, KernelSpec, QueryWeights};
use crate::sdr::{extract_subspace, CandidateMatrix, Method, SubspaceEstimate};
use crate::seed::Seed;

/// Bootstrap settings for the ladle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadleConfig {
    /// Replicate count; `None` means `min(n, 200)`.
    pub replicates: Option<usize>,
    /// Largest candidate dimension; `None` uses [`default_k_max`].
    pub k_max: Option<usize>,
    pub seed: Seed,
}

impl LadleConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            replicates: None,
            k_max: None,
            seed: Seed(seed),
        }
    }

    pub fn with_replicates(mut self, b: usize) -> Self {
        self.replicates = Some(b);
        self
    }

    pub fn replicates_for(&self, n: usize) -> usize {
        self.replicates.unwrap_or_else(|| n.min(200))
    }
}

/// `p − 1` for `p ≤ 10`, else `⌊p / ln p⌋`.
pub fn default_k_max(p: usize) -> usize {
    if p <= 10 {
        p.saturating_sub(1)
    } else {
        (p as f64 / (p as f64).ln()).floor() as usize
    }
}

/// `1 − |det(T̂ᵀ T*)|` for two `p × k` orthonormal bases.
pub fn eigenvector_variability(t_hat: &DMatrix<f64>, t_star: &DMatrix<f64>) -> f64 {
    if t_hat.ncols() == 0 {
        return 0.0;
    }
    let det = (t_hat.transpose() * t_star).determinant();
    (1.0 - det.abs()).clamp(0.0, 1.0)
}

/// The ladle objective and its parts on `k = 0..=k_max`.
#[derive(Debug, Clone, Serialize)]
pub struct LadleProfile {
    pub query: Vec<f64>,
    pub ks: Vec<usize>,
    pub f0: Vec<f64>,
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub g: Vec<f64>,
    pub replicates: usize,
    pub effective_replicates: usize,
    pub d_hat: usize,
    /// Full-sample SVD truncated at `d_hat`.
    pub estimate: SubspaceEstimate,
}

impl LadleProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f0,f,phi,g\n");
        for (i, k) in self.ks.iter().enumerate() {
            out.push_str(&format!("{k},{},{},{},{}\n", self.f0[i], self.f[i], self.phi[i], self.g[i]));
        }
        out
    }
}

/// Normalises raw bootstrap variability `f0` (with `f0[0] = 0`) and singular
/// values into `(f, φ, g, d̂)`. Ties in `g` go to the smaller `k`.
pub fn combine_ladle(singular_values: &[f64], f0: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let k_max = f0.len() - 1;
    let f0_total: f64 = 1.0 + f0.iter().sum::<f64>();
    let lambda_total: f64 = 1.0 + singular_values[..=k_max.min(singular_values.len() - 1)].iter().sum::<f64>();
    let f: Vec<f64> = f0.iter().map(|v| v / f0_total).collect();
    let phi: Vec<f64> = (0..=k_max)
        .map(|k| singular_values.get(k).copied().unwrap_or(0.0) / lambda_total)
        .collect();
    let g: Vec<f64> = f.iter().zip(&phi).map(|(a, b)| a + b).collect();
    let mut best = 0;
    for k in 1..g.len() {
        if g[k] < g[best] {
            best = k;
        }
    }
    (f, phi, g, best)
}

fn fit(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    weights: &QueryWeights,
    rows: Option<&[usize]>,
    method: Method,
) -> Result<SubspaceEstimate> {
    let moments = ConditionalMoments::from_weights(data, partition, query, weights, rows)?;
    let candidate = CandidateMatrix::from_moments(&moments, method)?;
    extract_subspace(&candidate, 0)
}

/// Row indices of a bootstrap resample of size `n`.
pub fn bootstrap_rows<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[allow(clippy::too_many_arguments)]
fn replicate_variability(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    weights: &QueryWeights,
    method: Method,
    full: &SubspaceEstimate,
    k_max: usize,
    seed: Seed,
    b: usize,
) -> Option<Vec<f64>> {
    let mut rng = seed.stream(b as u64);
    let rows = bootstrap_rows(data.n(), &mut rng);
    let star = fit(data, partition, query, weights, Some(&rows), method).ok()?;
    Some(
        (1..=k_max)
            .map(|k| eigenvector_variability(&full.leading(k), &star.leading(k)))
            .collect(),
    )
}

/// Ladle profile and dimension estimate at `query`.
pub fn ladle_profile(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
    method: Method,
    config: &LadleConfig,
) -> Result<LadleProfile> {
    let p = data.p();
    let k_max = config.k_max.unwrap_or_else(|| default_k_max(p));
    if k_max >= p {
        return Err(DpdrError::InvalidArgument(format!("k_max {k_max} must be below p = {p}")));
    }
    let b_count = config.replicates_for(data.n());
    if b_count == 0 {
        return Err(DpdrError::InvalidArgument("bootstrap needs at least one replicate".into()));
    }
    // Moments at the query, including the argument checks.
    ConditionalMoments::estimate(data, partition, query, spec)?;
    let weights = QueryWeights::new(data, partition, query, spec);
    let mut full = fit(data, partition, query, &weights, None, method)?;

    let run = |b: usize| {
        replicate_variability(data, partition, query, &weights, method, &full, k_max, config.seed, b)
    };
    #[cfg(feature = "parallel")]
    let per_rep: Vec<Option<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..b_count).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_rep: Vec<Option<Vec<f64>>> = (0..b_count).map(run).collect();

    let ok: Vec<Vec<f64>> = per_rep.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(DpdrError::AllReplicatesFailed(b_count));
    }
    let mut f0 = vec![0.0; k_max + 1];
    for rep in &ok {
        for (k, v) in rep.iter().enumerate() {
            f0[k + 1] += v;
        }
    }
    for v in f0.iter_mut().skip(1) {
        *v = (*v / ok.len() as f64).clamp(0.0, 1.0);
    }
    let (f, phi, g, d_hat) = combine_ladle(&full.singular_values, &f0);
    full.dimension = d_hat;
    Ok(LadleProfile {
        query: query.to_vec(),
        ks: (0..=k_max).collect(),
        f0,
        f,
        phi,
        g,
        replicates: b_count,
        effective_replicates: ok.len(),
        d_hat,
        estimate: full,
    })
}

/// Ladle estimates over a grid of query points. Grid point `j` bootstraps
/// with the child seed `j`, so results do not depend on the grid's length.
pub fn estimate_order(
    data: &Dataset,
    partition: &SlicePartition,
    grid: &[Vec<f64>],
    spec: &KernelSpec,
    method: Method,
    config: &LadleConfig,
) -> Vec<Result<LadleProfile>> {
    grid.iter()
        .enumerate()
        .map(|(j, w)| {
            let cfg = LadleConfig {
                seed: config.seed.child(j as u64),
                ..*config
            };
            ladle_profile(data, partition, w, spec, method, &cfg)
        })
        .collect()
}
