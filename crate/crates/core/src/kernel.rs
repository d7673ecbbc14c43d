//! Kernels and Nadaraya-Watson estimators of the conditional moments of `x`
//! given `w`, overall and within response slices.
//!
//! All estimators are ratios of kernel-weighted sums, so the normalising
//! constant `h^-q` and the kernel's peak value cancel. Internally rows are
//! weighted by the kernel profile scaled to peak 1; the mass floor is a
//! fraction of `n` in those units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SlicePartition};
use crate::error::{DpdrError, Result};
use crate::linalg::symmetrize;

/// Total relative kernel mass below `MASS_FLOOR * n` means the query point is
/// outside the data support.
pub const MASS_FLOOR: f64 = 1e-8;
/// Slice probabilities below this make `V = U/p` unstable.
pub const PROB_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl KernelFamily {
    /// The kernel density `K(t)`.
    pub fn density(self, t: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            KernelFamily::Epanechnikov => {
                if t.abs() <= 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K(t) / K(0)`.
    fn profile(self, t: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * t * t).exp(),
            KernelFamily::Epanechnikov => (1.0 - t * t).max(0.0),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = DpdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => Ok(KernelFamily::Gaussian),
            "epan" | "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(DpdrError::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel family and bandwidth. One bandwidth is shared by every coordinate
/// of `w` and every moment; optional per-slice bandwidths apply only to the
/// within-slice mean and covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub slice_bandwidths: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self {
            family,
            bandwidth,
            slice_bandwidths: None,
        })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn with_slice_bandwidths(mut self, hs: Vec<f64>) -> Result<Self> {
        for &h in &hs {
            check_bandwidth(h)?;
        }
        self.slice_bandwidths = Some(hs);
        Ok(self)
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self {
            bandwidth,
            ..self.clone()
        })
    }

    fn slice_bandwidth(&self, l: usize) -> f64 {
        self.slice_bandwidths
            .as_ref()
            .and_then(|hs| hs.get(l).copied())
            .unwrap_or(self.bandwidth)
    }

    /// Product-kernel relative weight of every row of `w` around `query`.
    pub(crate) fn relative_weights(&self, data: &Dataset, query: &[f64], h: f64) -> Vec<f64> {
        (0..data.n())
            .map(|i| relative_weight(self.family, data.w_slice(i), query, h))
            .collect()
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(DpdrError::InvalidArgument(format!("bandwidth must be positive, got {h}")))
    }
}

pub(crate) fn relative_weight(family: KernelFamily, wi: &[f64], query: &[f64], h: f64) -> f64 {
    wi.iter()
        .zip(query)
        .map(|(a, b)| family.profile((a - b) / h))
        .product()
}

/// `K_h(u) = prod_j K(u_j / h) / h`.
pub fn kernel_weight(u: &[f64], spec: &KernelSpec) -> f64 {
    let h = spec.bandwidth;
    u.iter().map(|&t| spec.family.density(t / h) / h).product()
}

fn check_query(data: &Dataset, query: &[f64]) -> Result<()> {
    if query.len() != data.q() {
        return Err(DpdrError::InvalidArgument(format!(
            "query has dimension {}, data has q = {}",
            query.len(),
            data.q()
        )));
    }
    Ok(())
}

fn check_mass(data: &Dataset, query: &[f64], mass: f64) -> Result<()> {
    if mass < MASS_FLOOR * data.n() as f64 || !mass.is_finite() {
        return Err(DpdrError::DegenerateNeighborhood {
            query: query.to_vec(),
            mass,
        });
    }
    Ok(())
}

/// Nadaraya-Watson estimate of `E(X | W = w)`.
pub fn nw_mean(data: &Dataset, query: &[f64], spec: &KernelSpec) -> Result<DVector<f64>> {
    check_query(data, query)?;
    let weights = spec.relative_weights(data, query, spec.bandwidth);
    let mass: f64 = weights.iter().sum();
    check_mass(data, query, mass)?;
    let mut sum = DVector::zeros(data.p());
    for (i, &k) in weights.iter().enumerate() {
        if k > 0.0 {
            for (s, &x) in sum.iter_mut().zip(data.x_slice(i)) {
                *s += k * x;
            }
        }
    }
    Ok(sum / mass)
}

/// Kernel-weighted per-slice sums at one query point.
#[derive(Debug, Clone)]
pub(crate) struct SliceSums {
    pub mass: f64,
    pub slice_mass: Vec<f64>,
    pub first: Vec<DVector<f64>>,
    pub second: Vec<DMatrix<f64>>,
}

impl SliceSums {
    pub fn zeros(h: usize, p: usize) -> Self {
        Self {
            mass: 0.0,
            slice_mass: vec![0.0; h],
            first: vec![DVector::zeros(p); h],
            second: vec![DMatrix::zeros(p, p); h],
        }
    }

    /// Adds (or with negative `k`, removes) one weighted observation.
    /// Only the upper triangle of `second` is maintained; call
    /// [`SliceSums::finish`] before reading it.
    pub fn add(&mut self, l: usize, x: &[f64], k: f64) {
        self.mass += k;
        self.slice_mass[l] += k;
        let first = &mut self.first[l];
        let second = &mut self.second[l];
        let p = x.len();
        for a in 0..p {
            let kx = k * x[a];
            first[a] += kx;
            for b in a..p {
                second[(a, b)] += kx * x[b];
            }
        }
    }

    pub fn finish(&mut self) {
        for m in &mut self.second {
            let p = m.nrows();
            for a in 0..p {
                for b in (a + 1)..p {
                    m[(b, a)] = m[(a, b)];
                }
            }
        }
    }

    pub fn accumulate(data: &Dataset, partition: &SlicePartition, weights: &[f64]) -> Self {
        let mut sums = Self::zeros(partition.n_slices(), data.p());
        for (i, &k) in weights.iter().enumerate() {
            if k > 0.0 {
                sums.add(partition.label(i), data.x_slice(i), k);
            }
        }
        sums.finish();
        sums
    }
}

/// Relative kernel weights of every observation at one query point.
#[derive(Debug, Clone)]
pub(crate) struct QueryWeights {
    pub base: Vec<f64>,
    /// One weight vector per slice when slice bandwidths are set.
    pub per_slice: Option<Vec<Vec<f64>>>,
}

impl QueryWeights {
    pub fn new(data: &Dataset, partition: &SlicePartition, query: &[f64], spec: &KernelSpec) -> Self {
        let base = spec.relative_weights(data, query, spec.bandwidth);
        let per_slice = spec.slice_bandwidths.as_ref().map(|_| {
            (0..partition.n_slices())
                .map(|l| spec.relative_weights(data, query, spec.slice_bandwidth(l)))
                .collect()
        });
        Self { base, per_slice }
    }
}

fn accumulate_rows(
    data: &Dataset,
    partition: &SlicePartition,
    weights: &[f64],
    rows: Option<&[usize]>,
) -> SliceSums {
    match rows {
        None => SliceSums::accumulate(data, partition, weights),
        Some(rows) => {
            let mut sums = SliceSums::zeros(partition.n_slices(), data.p());
            for &i in rows {
                let k = weights[i];
                if k > 0.0 {
                    sums.add(partition.label(i), data.x_slice(i), k);
                }
            }
            sums.finish();
            sums
        }
    }
}

fn check_partition(data: &Dataset, partition: &SlicePartition) -> Result<()> {
    if partition.labels().len() != data.n() {
        return Err(DpdrError::InvalidArgument(format!(
            "partition labels {} rows, data has {}",
            partition.labels().len(),
            data.n()
        )));
    }
    Ok(())
}

fn check_probs(query: &[f64], probs: &[f64]) -> Result<()> {
    if let Some((slice, &prob)) = probs.iter().enumerate().find(|(_, &p)| p < PROB_FLOOR) {
        return Err(DpdrError::EmptySliceAtQuery {
            slice,
            prob,
            query: query.to_vec(),
        });
    }
    Ok(())
}

fn slice_sums_at(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
) -> Result<SliceSums> {
    check_query(data, query)?;
    check_partition(data, partition)?;
    let weights = spec.relative_weights(data, query, spec.bandwidth);
    let sums = SliceSums::accumulate(data, partition, &weights);
    check_mass(data, query, sums.mass)?;
    Ok(sums)
}

/// `p̂_{l,w}`: kernel estimate of `P(slice = l | W = w)`.
pub fn nw_slice_probs(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
) -> Result<Vec<f64>> {
    let sums = slice_sums_at(data, partition, query, spec)?;
    let probs: Vec<f64> = sums.slice_mass.iter().map(|m| m / sums.mass).collect();
    check_probs(query, &probs)?;
    Ok(probs)
}

/// `Û_{l,w}`: kernel estimate of `E(X 1(slice = l) | W = w)`.
pub fn nw_slice_means(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
) -> Result<Vec<DVector<f64>>> {
    Ok(ConditionalMoments::estimate(data, partition, query, spec)?.slice_first)
}

/// `N̂_{l,w}`: kernel estimate of `E(X Xᵀ 1(slice = l) | W = w)`.
pub fn nw_second_moments(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
) -> Result<Vec<DMatrix<f64>>> {
    Ok(ConditionalMoments::estimate(data, partition, query, spec)?.slice_second)
}

/// Covariance estimates at one query point.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    /// `Cov(X | W = w)`: `Σ_l N̂_l − m̂ m̂ᵀ`.
    pub total: DMatrix<f64>,
    /// `Σ_l p̂_l Σ̂_l`, the within-slice pooled covariance.
    pub pooled_within: DMatrix<f64>,
    pub slice_means: Vec<DVector<f64>>,
    pub slice_covs: Vec<DMatrix<f64>>,
}

/// Conditional covariance of `x` at `w`, overall and per slice.
pub fn nw_cov(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
) -> Result<CovarianceEstimate> {
    let m = ConditionalMoments::estimate(data, partition, query, spec)?;
    Ok(CovarianceEstimate {
        total: m.cov,
        pooled_within: m.pooled_within,
        slice_means: m.slice_means,
        slice_covs: m.slice_covs,
    })
}

/// Every kernel moment the candidate matrices need, at one query point.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub query: Vec<f64>,
    /// Sum of relative kernel weights (peak-1 units); an effective sample size.
    pub effective_weight_sum: f64,
    /// `m̂(w)`.
    pub mean: DVector<f64>,
    /// `p̂_{l,w}`.
    pub probs: Vec<f64>,
    /// `Û_{l,w}`.
    pub slice_first: Vec<DVector<f64>>,
    /// `N̂_{l,w}`.
    pub slice_second: Vec<DMatrix<f64>>,
    /// Total conditional covariance `Σ̂_w`.
    pub cov: DMatrix<f64>,
    /// `m̂_l(w)`.
    pub slice_means: Vec<DVector<f64>>,
    /// `Σ̂_{l,w}`.
    pub slice_covs: Vec<DMatrix<f64>>,
    pub pooled_within: DMatrix<f64>,
}

impl ConditionalMoments {
    pub fn estimate(
        data: &Dataset,
        partition: &SlicePartition,
        query: &[f64],
        spec: &KernelSpec,
    ) -> Result<Self> {
        check_query(data, query)?;
        check_partition(data, partition)?;
        let weights = QueryWeights::new(data, partition, query, spec);
        Self::from_weights(data, partition, query, &weights, None)
    }

    /// Moments from cached kernel weights. With `rows`, the sample is the
    /// multiset `rows` of the original observations, each keeping its
    /// original slice label and weight.
    pub(crate) fn from_weights(
        data: &Dataset,
        partition: &SlicePartition,
        query: &[f64],
        weights: &QueryWeights,
        rows: Option<&[usize]>,
    ) -> Result<Self> {
        let n = rows.map_or(data.n(), |r| r.len());
        let sums = accumulate_rows(data, partition, &weights.base, rows);
        if sums.mass < MASS_FLOOR * n as f64 || !sums.mass.is_finite() {
            return Err(DpdrError::DegenerateNeighborhood {
                query: query.to_vec(),
                mass: sums.mass,
            });
        }
        let probs: Vec<f64> = sums.slice_mass.iter().map(|m| m / sums.mass).collect();
        check_probs(query, &probs)?;
        let per_slice = match &weights.per_slice {
            Some(ws) => ws
                .iter()
                .enumerate()
                .map(|(l, w)| {
                    let s = accumulate_rows(data, partition, w, rows);
                    if s.slice_mass[l] < MASS_FLOOR * n as f64 {
                        return Err(DpdrError::EmptySliceAtQuery {
                            slice: l,
                            prob: 0.0,
                            query: query.to_vec(),
                        });
                    }
                    Ok(slice_moments(&s, l))
                })
                .collect::<Result<Vec<_>>>()?,
            None => (0..partition.n_slices()).map(|l| slice_moments(&sums, l)).collect(),
        };
        Ok(Self::from_sums(query, &sums, probs, per_slice))
    }

    fn from_sums(
        query: &[f64],
        sums: &SliceSums,
        probs: Vec<f64>,
        per_slice: Vec<(DVector<f64>, DMatrix<f64>)>,
    ) -> Self {
        let p = sums.first[0].len();
        let slice_first: Vec<DVector<f64>> = sums.first.iter().map(|f| f / sums.mass).collect();
        let slice_second: Vec<DMatrix<f64>> = sums.second.iter().map(|s| s / sums.mass).collect();
        let mean = slice_first
            .iter()
            .fold(DVector::zeros(p), |acc, u| acc + u);
        let mut cov = slice_second.iter().fold(DMatrix::zeros(p, p), |acc, n| acc + n);
        cov -= &mean * mean.transpose();
        symmetrize(&mut cov);
        let (slice_means, slice_covs): (Vec<_>, Vec<_>) = per_slice.into_iter().unzip();
        let mut pooled_within = slice_covs
            .iter()
            .zip(&probs)
            .fold(DMatrix::zeros(p, p), |acc, (c, &pl)| acc + c * pl);
        symmetrize(&mut pooled_within);
        Self {
            query: query.to_vec(),
            effective_weight_sum: sums.mass,
            mean,
            probs,
            slice_first,
            slice_second,
            cov,
            slice_means,
            slice_covs,
            pooled_within,
        }
    }

    pub fn n_slices(&self) -> usize {
        self.probs.len()
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    /// `V̂_{l,w} = Û_{l,w} / p̂_{l,w}`.
    pub fn slice_mean_ratio(&self, l: usize) -> DVector<f64> {
        &self.slice_first[l] / self.probs[l]
    }

    /// `R̂_{l,w} = N̂_{l,w} / p̂_{l,w}`.
    pub fn slice_second_ratio(&self, l: usize) -> DMatrix<f64> {
        &self.slice_second[l] / self.probs[l]
    }
}

/// Slice-weighted mean and covariance of slice `l`.
pub(crate) fn slice_moments(sums: &SliceSums, l: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mass = sums.slice_mass[l];
    let mean = &sums.first[l] / mass;
    let mut cov = &sums.second[l] / mass - &mean * mean.transpose();
    symmetrize(&mut cov);
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{asymmetry, min_eigenvalue};
    use proptest::prelude::*;

    fn four_points(x: [f64; 4]) -> (Dataset, SlicePartition) {
        let ds = Dataset::from_rows(
            &[1.0, 2.0, 3.0, 4.0],
            &x.iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            &[vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]],
        )
        .unwrap();
        let part = SlicePartition::from_labels(vec![0, 0, 1, 1], 2).unwrap();
        (ds, part)
    }

    #[test]
    fn kernel_values() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!((kernel_weight(&[0.0], &g) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let e = KernelSpec::new(KernelFamily::Epanechnikov, 1.0).unwrap();
        assert_eq!(kernel_weight(&[2.0], &e), 0.0);
        let g2 = KernelSpec::gaussian(2.0).unwrap();
        let expected = (1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt())).powi(2);
        assert!((kernel_weight(&[0.0, 0.0], &g2) - expected).abs() < 1e-15);
        assert!((expected - 0.03979).abs() < 1e-5);
    }

    #[test]
    fn bad_bandwidth() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        assert!(KernelSpec::gaussian(1.0)
            .unwrap()
            .with_slice_bandwidths(vec![1.0, -1.0])
            .is_err());
    }

    #[test]
    fn nw_mean_hand_values() {
        let ds = Dataset::from_rows(
            &[0.0, 1.0, 2.0],
            &[vec![0.0], vec![1.0], vec![4.0]],
            &[vec![-1.0], vec![0.0], vec![1.0]],
        )
        .unwrap();
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let m = nw_mean(&ds, &[0.0], &spec).unwrap();
        let e = (-0.5f64).exp();
        let expected = (1.0 + 4.0 * e) / (1.0 + 2.0 * e);
        assert!((m[0] - expected).abs() < 1e-14);
        assert!((m[0] - 1.548137).abs() < 1e-6);

        let sym = ds.with_x(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0])).unwrap();
        assert!((nw_mean(&sym, &[0.0], &spec).unwrap()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nw_mean_limits() {
        let ds = Dataset::from_rows(
            &[0.0, 1.0, 2.0, 3.0],
            &[vec![2.0, 5.0], vec![-1.0, 5.0], vec![4.0, 5.0], vec![0.5, 5.0]],
            &[vec![-0.7], vec![0.1], vec![0.4], vec![0.9]],
        )
        .unwrap();
        let flat = KernelSpec::gaussian(1e8).unwrap();
        let m = nw_mean(&ds, &[0.3], &flat).unwrap();
        assert!((m[0] - 1.375).abs() < 1e-6);
        // constant column stays constant for any bandwidth
        for h in [0.05, 0.5, 5.0] {
            let m = nw_mean(&ds, &[0.2], &KernelSpec::gaussian(h).unwrap()).unwrap();
            assert!((m[1] - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_neighborhood() {
        let (ds, _) = four_points([1.0, 2.0, 3.0, 4.0]);
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 0.5).unwrap();
        assert!(matches!(
            nw_mean(&ds, &[5.0], &spec),
            Err(DpdrError::DegenerateNeighborhood { .. })
        ));
    }

    #[test]
    fn four_point_slice_quantities() {
        let (ds, part) = four_points([1.0, 2.0, 3.0, 4.0]);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let e2 = (-2.0f64).exp();
        let denom = 2.0 + 2.0 * e2;
        let p = nw_slice_probs(&ds, &part, &[1.0], &spec).unwrap();
        assert!((p[1] - 2.0 / denom).abs() < 1e-14);
        assert!((p[1] - 0.8808).abs() < 1e-4);
        let u = nw_slice_means(&ds, &part, &[1.0], &spec).unwrap();
        assert!((u[1][0] - 7.0 / denom).abs() < 1e-14);
        assert!((u[1][0] - 3.0828).abs() < 1e-4);
        let n = nw_second_moments(&ds, &part, &[1.0], &spec).unwrap();
        assert!((n[1][(0, 0)] - 25.0 / denom).abs() < 1e-13);
        assert!((n[1][(0, 0)] - 11.010).abs() < 1e-3);
    }

    #[test]
    fn single_slice_identities() {
        let (ds, _) = four_points([1.0, 2.0, 3.0, 4.0]);
        let one = SlicePartition::from_labels(vec![0; 4], 1).unwrap();
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let probs = nw_slice_probs(&ds, &one, &[0.2], &spec).unwrap();
        assert_eq!(probs, vec![1.0]);
        let u = nw_slice_means(&ds, &one, &[0.2], &spec).unwrap();
        let m = nw_mean(&ds, &[0.2], &spec).unwrap();
        assert!((u[0][0] - m[0]).abs() < 1e-14);

        let flat = KernelSpec::gaussian(1e8).unwrap();
        let cov = nw_cov(&ds, &one, &[0.0], &flat).unwrap();
        assert!((cov.total[(0, 0)] - 1.25).abs() < 1e-9);
        assert!((cov.pooled_within[(0, 0)] - 1.25).abs() < 1e-9);
    }

    #[test]
    fn x_identically_one() {
        let (ds, part) = four_points([1.0; 4]);
        let spec = KernelSpec::gaussian(0.8).unwrap();
        let probs = nw_slice_probs(&ds, &part, &[0.3], &spec).unwrap();
        let n = nw_second_moments(&ds, &part, &[0.3], &spec).unwrap();
        for l in 0..2 {
            assert!((n[l][(0, 0)] - probs[l]).abs() < 1e-15);
        }
        let cov = nw_cov(&ds, &part, &[0.3], &spec).unwrap();
        assert!(cov.total[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn flat_limit_gives_marginal_fractions() {
        let ds = Dataset::from_rows(
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &[vec![0.0], vec![1.0], vec![0.0], vec![2.0], vec![1.0]],
            &[vec![0.0], vec![0.3], vec![0.6], vec![0.9], vec![-0.2]],
        )
        .unwrap();
        let part = SlicePartition::from_labels(vec![0, 0, 1, 1, 1], 2).unwrap();
        let p = nw_slice_probs(&ds, &part, &[0.1], &KernelSpec::gaussian(1e8).unwrap()).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-9 && (p[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn empty_slice_at_query() {
        let (ds, part) = four_points([1.0, 2.0, 3.0, 4.0]);
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 0.5).unwrap();
        let err = nw_slice_means(&ds, &part, &[1.0], &spec).unwrap_err();
        assert!(matches!(err, DpdrError::EmptySliceAtQuery { slice: 0, .. }));
    }

    #[test]
    fn prop2_identity_on_discrete_w() {
        // exact-match kernel: integer W with an Epanechnikov window of 0.5
        let ys = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0, 5.5, 3.5, 8.0, 9.7];
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i * i) as f64 * 0.1])
            .collect();
        let ws: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 3) as f64]).collect();
        let ds = Dataset::from_rows(&ys, &xs, &ws).unwrap();
        let part = SlicePartition::from_labels((0..12).map(|i| (i / 2) % 2).collect(), 2).unwrap();
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 0.5).unwrap();
        for wv in 0..3 {
            let mom = ConditionalMoments::estimate(&ds, &part, &[wv as f64], &spec).unwrap();
            for l in 0..2 {
                let members: Vec<usize> = (0..12)
                    .filter(|&i| i % 3 == wv && part.label(i) == l)
                    .collect();
                let v = mom.slice_mean_ratio(l);
                for j in 0..2 {
                    let brute = members.iter().map(|&i| xs[i][j]).sum::<f64>() / members.len() as f64;
                    assert!((v[j] - brute).abs() < 1e-13);
                }
            }
        }
    }

    fn random_dataset(seed: u64, n: usize, p: usize) -> (Dataset, SlicePartition) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
        let w: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>() * 2.0 - 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + rng.random::<f64>()).collect();
        let ds = Dataset::from_rows(&y, &x, &w).unwrap();
        let part = SlicePartition::equal_frequency(&y, 3).unwrap();
        (ds, part)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn moment_invariants(seed in 0u64..10_000, wq in -0.8f64..0.8, h in 0.2f64..2.0) {
            let (ds, part) = random_dataset(seed, 40, 3);
            let spec = KernelSpec::gaussian(h).unwrap();
            let m = ConditionalMoments::estimate(&ds, &part, &[wq], &spec).unwrap();
            prop_assert!((m.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let usum = m.slice_first.iter().fold(DVector::zeros(3), |a, u| a + u);
            prop_assert!((usum - &m.mean).amax() < 1e-12);
            prop_assert!(asymmetry(&m.cov) < 1e-12);
            prop_assert!(min_eigenvalue(&m.cov) > -1e-10);
            for c in &m.slice_covs {
                prop_assert!(asymmetry(c) < 1e-12);
                prop_assert!(min_eigenvalue(c) > -1e-10);
            }
            for n in &m.slice_second {
                prop_assert!(asymmetry(n) < 1e-12);
                prop_assert!(min_eigenvalue(n) > -1e-10);
            }
        }

        #[test]
        fn translation_equivariance(seed in 0u64..10_000, shift in -5f64..5.0) {
            let (ds, part) = random_dataset(seed, 30, 2);
            let shifted = Dataset::new(
                ds.y().clone(),
                ds.x().clone(),
                ds.w().map(|v| v + shift),
            ).unwrap();
            let spec = KernelSpec::gaussian(0.6).unwrap();
            let a = ConditionalMoments::estimate(&ds, &part, &[0.1], &spec).unwrap();
            let b = ConditionalMoments::estimate(&shifted, &part, &[0.1 + shift], &spec).unwrap();
            prop_assert!((a.cov - b.cov).amax() < 1e-12);
            prop_assert!((a.mean - b.mean).amax() < 1e-12);
        }
    }
}
