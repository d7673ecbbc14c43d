//! Bandwidth selection: per-slice leave-one-out cross-validation followed by
//! a mixture-normal likelihood vote among the per-slice winners.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{Dataset, SlicePartition};
use crate::error::{DpdrError, Result};
use crate::kernel::{relative_weight, slice_moments, KernelFamily, SliceSums, MASS_FLOOR, PROB_FLOOR};
use crate::linalg::{inv_quad_form, log_det, ridge_cholesky, symmetrize};
use crate::sdr::Method;

/// Relative ridge for the covariances inside CV and the mixture likelihood.
pub const CV_RIDGE: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 12;

/// Which covariance scales the leave-one-out residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// Within-slice covariance pooled over slices (shared, LDA-like).
    Pooled,
    /// The slice's own covariance (QDA-like).
    PerSlice,
}

impl CvMode {
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::Sir => CvMode::Pooled,
            Method::Save | Method::Dr => CvMode::PerSlice,
        }
    }
}

/// `1.06 · sd(W) · n^(-1/5)`, averaging the coordinate sds when `q > 1`.
pub fn rule_of_thumb(data: &Dataset) -> f64 {
    let n = data.n() as f64;
    let w = data.w();
    let sd_mean = (0..data.q())
        .map(|j| {
            let col = w.column(j);
            let mean = col.mean();
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .sum::<f64>()
        / data.q() as f64;
    1.06 * sd_mean * n.powf(-0.2)
}

/// `count` geometric points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 || (count == 1 && hi != lo) {
        return Err(DpdrError::InvalidArgument(format!(
            "bad bandwidth grid {lo}:{hi}:{count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| lo * (ratio * k as f64).exp()).collect();
    grid[count - 1] = hi;
    Ok(grid)
}

/// Twelve geometric points from `0.5·h_ROT` to `4·h_ROT`.
pub fn default_grid(data: &Dataset) -> Vec<f64> {
    let h = rule_of_thumb(data);
    geometric_grid(0.5 * h, 4.0 * h, DEFAULT_GRID_POINTS).expect("rule-of-thumb bandwidth is positive")
}

/// Kernel sums at `W_i` with observation `i` removed.
fn loo_sums(data: &Dataset, partition: &SlicePartition, family: KernelFamily, h: f64, i: usize) -> SliceSums {
    let wi = data.w_slice(i);
    let mut sums = SliceSums::zeros(partition.n_slices(), data.p());
    for j in 0..data.n() {
        if j == i {
            continue;
        }
        let k = relative_weight(family, data.w_slice(j), wi, h);
        if k > 0.0 {
            sums.add(partition.label(j), data.x_slice(j), k);
        }
    }
    sums.finish();
    sums
}

/// One leave-one-out term `(x_i − m̂)ᵀ Σ̂⁻¹ (x_i − m̂) + log|Σ̂|`, or `None`
/// when the neighbourhood is empty or the covariance singular.
fn loo_term(
    data: &Dataset,
    partition: &SlicePartition,
    family: KernelFamily,
    h: f64,
    i: usize,
    mode: CvMode,
) -> Option<f64> {
    let floor = MASS_FLOOR * data.n() as f64;
    let sums = loo_sums(data, partition, family, h, i);
    let l = partition.label(i);
    if sums.slice_mass[l] < floor {
        return None;
    }
    let (mean, own_cov) = slice_moments(&sums, l);
    let cov = match mode {
        CvMode::PerSlice => own_cov,
        CvMode::Pooled => {
            let p = data.p();
            let mut pooled = DMatrix::zeros(p, p);
            for k in 0..partition.n_slices() {
                if sums.slice_mass[k] >= floor {
                    let (_, c) = slice_moments(&sums, k);
                    pooled += c * (sums.slice_mass[k] / sums.mass);
                }
            }
            symmetrize(&mut pooled);
            pooled
        }
    };
    let chol = ridge_cholesky(&cov, CV_RIDGE).ok()?;
    let resid = DVector::from_column_slice(data.x_slice(i)) - mean;
    let term = inv_quad_form(&chol, &resid) + log_det(&chol);
    term.is_finite().then_some(term)
}

fn check_slice_size(data: &Dataset, partition: &SlicePartition, l: usize) -> Result<()> {
    let size = partition.counts()[l];
    let needed = data.p() + 2;
    if size < needed {
        return Err(DpdrError::SliceTooSmall { slice: l, size, needed });
    }
    Ok(())
}

/// Leave-one-out CV score of slice `l` at bandwidth `h`, each held-out point
/// predicted at its own `W_i`.
pub fn cv_slice(
    data: &Dataset,
    partition: &SlicePartition,
    l: usize,
    h: f64,
    mode: CvMode,
    family: KernelFamily,
) -> Result<f64> {
    if l >= partition.n_slices() {
        return Err(DpdrError::InvalidArgument(format!("slice {l} out of range")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(DpdrError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    check_slice_size(data, partition, l)?;
    let members = partition.members(l);
    let mut total = 0.0;
    for &i in &members {
        total += loo_term(data, partition, family, h, i, mode).ok_or(DpdrError::SingularCovariance)?;
    }
    Ok(total / members.len() as f64)
}

/// `log Σ_l π_l N(x; μ_l, Σ_l)` computed with log-sum-exp. Components whose
/// covariance fails to factor (after ridge) are skipped; `None` if none remain.
pub fn mixture_log_density(x: &DVector<f64>, components: &[(f64, DVector<f64>, DMatrix<f64>)]) -> Option<f64> {
    let p = x.len() as f64;
    let logs: Vec<f64> = components
        .iter()
        .filter_map(|(pi, mu, cov)| {
            let chol = ridge_cholesky(cov, CV_RIDGE).ok()?;
            let v = pi.ln()
                - 0.5 * (p * (2.0 * std::f64::consts::PI).ln() + log_det(&chol) + inv_quad_form(&chol, &(x - mu)));
            v.is_finite().then_some(v)
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    Some(max + logs.iter().map(|v| (v - max).exp()).sum::<f64>().ln())
}

/// Mixture log-likelihood and the number of observations left out of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureLogLik {
    pub value: f64,
    pub used: usize,
    pub dropped: usize,
}

/// `Σ_i log Σ_l p̂_l(W_i) N(x_i; m̂_l(W_i), Σ̂_l(W_i))` at bandwidth `h`.
/// Points with an empty neighbourhood or no usable component are dropped.
pub fn mixture_loglik(
    data: &Dataset,
    partition: &SlicePartition,
    h: f64,
    family: KernelFamily,
) -> Result<MixtureLogLik> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DpdrError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let floor = MASS_FLOOR * data.n() as f64;
    let mut value = 0.0;
    let mut used = 0;
    for i in 0..data.n() {
        let wi = data.w_slice(i);
        let weights: Vec<f64> = (0..data.n())
            .map(|j| relative_weight(family, data.w_slice(j), wi, h))
            .collect();
        let sums = SliceSums::accumulate(data, partition, &weights);
        if sums.mass < floor {
            continue;
        }
        let components: Vec<_> = (0..partition.n_slices())
            .filter_map(|l| {
                let prob = sums.slice_mass[l] / sums.mass;
                if prob < PROB_FLOOR {
                    return None;
                }
                let (mean, cov) = slice_moments(&sums, l);
                Some((prob, mean, cov))
            })
            .collect();
        if let Some(v) = mixture_log_density(&DVector::from_column_slice(data.x_slice(i)), &components) {
            value += v;
            used += 1;
        }
    }
    Ok(MixtureLogLik {
        value,
        used,
        dropped: data.n() - used,
    })
}

/// Outcome of a bandwidth search.
#[derive(Debug, Clone, Serialize)]
pub struct BandwidthSearch {
    pub mode: CvMode,
    pub grid: Vec<f64>,
    /// `per_slice_cv[l][k]`: CV of slice `l` at `grid[k]`, `None` if invalid.
    pub per_slice_cv: Vec<Vec<Option<f64>>>,
    /// Per-slice minimisers; `None` for slices with no valid cell.
    pub h_l_star: Vec<Option<f64>>,
    /// Distinct per-slice winners, increasing.
    pub candidates: Vec<f64>,
    pub loglik: Vec<MixtureLogLik>,
    pub h_opt: f64,
}

fn first_min<'a>(values: impl Iterator<Item = (f64, Option<f64>)> + 'a) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (h, v) in values {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((h, v));
            }
        }
    }
    best.map(|(h, _)| h)
}

/// Per-slice CV over `grid`, then the mixture likelihood picks among the
/// per-slice winners. Slices smaller than `p + 2` contribute no cells.
pub fn select_bandwidth(
    data: &Dataset,
    partition: &SlicePartition,
    method: Method,
    grid: &[f64],
    family: KernelFamily,
) -> Result<BandwidthSearch> {
    if grid.is_empty() || grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(DpdrError::InvalidArgument("bandwidth grid must be nonempty and positive".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mode = CvMode::for_method(method);
    let slices = partition.n_slices();
    let usable: Vec<bool> = (0..slices).map(|l| check_slice_size(data, partition, l).is_ok()).collect();

    let column = |h: f64| -> Vec<Option<f64>> {
        let mut totals = vec![Some(0.0); slices];
        for i in 0..data.n() {
            let l = partition.label(i);
            if !usable[l] || totals[l].is_none() {
                continue;
            }
            totals[l] = match loo_term(data, partition, family, h, i, mode) {
                Some(t) => totals[l].map(|s| s + t),
                None => None,
            };
        }
        totals
            .into_iter()
            .enumerate()
            .map(|(l, t)| if usable[l] { t.map(|s| s / partition.counts()[l] as f64) } else { None })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let columns: Vec<Vec<Option<f64>>> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&h| column(h)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Vec<Option<f64>>> = grid.iter().map(|&h| column(h)).collect();

    let per_slice_cv: Vec<Vec<Option<f64>>> = (0..slices)
        .map(|l| columns.iter().map(|c| c[l]).collect())
        .collect();
    let h_l_star: Vec<Option<f64>> = per_slice_cv
        .iter()
        .map(|row| first_min(grid.iter().copied().zip(row.iter().copied())))
        .collect();
    let mut candidates: Vec<f64> = h_l_star.iter().flatten().copied().collect();
    if candidates.is_empty() {
        return Err(DpdrError::AllCellsInvalid);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let loglik = candidates
        .iter()
        .map(|&h| mixture_loglik(data, partition, h, family))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for k in 1..candidates.len() {
        let (a, b) = (loglik[k].value, loglik[best].value);
        let better = if loglik[k].used != loglik[best].used {
            loglik[k].used > loglik[best].used
        } else {
            a > b
        };
        if better {
            best = k;
        }
    }
    Ok(BandwidthSearch {
        mode,
        grid,
        per_slice_cv,
        h_l_star,
        h_opt: candidates[best],
        candidates,
        loglik,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = Seed(seed).rng();
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let w = DMatrix::from_fn(n, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>());
        Dataset::new(y, x, w).unwrap()
    }

    #[test]
    fn rule_of_thumb_and_grid() {
        let ds = Dataset::from_rows(&[1.0, 2.0], &[vec![0.0], vec![1.0]], &[vec![0.0], vec![2.0]]).unwrap();
        let h = rule_of_thumb(&ds);
        assert!((h - 1.06 * 2f64.sqrt() * 2f64.powf(-0.2)).abs() < 1e-12);
        let g = geometric_grid(0.5, 4.0, 4).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12 && (g[3] - 4.0).abs() < 1e-12);
        assert_eq!(default_grid(&ds).len(), 12);
        assert!(geometric_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn cv_of_standard_normal_with_flat_kernel() {
        let ds = gaussian_data(500, 1, 3);
        let part = SlicePartition::from_labels(vec![0; 500], 1).unwrap();
        let cv = cv_slice(&ds, &part, 0, 1e6, CvMode::PerSlice, KernelFamily::Gaussian).unwrap();
        assert!((cv - 1.0).abs() < 0.2, "{cv}");
    }

    #[test]
    fn cv_is_location_invariant() {
        let ds = gaussian_data(80, 2, 4);
        let shifted = ds.with_x(ds.x().map(|v| v + 7.5)).unwrap();
        let part = SlicePartition::equal_frequency(ds.y().as_slice(), 2).unwrap();
        for mode in [CvMode::Pooled, CvMode::PerSlice] {
            let a = cv_slice(&ds, &part, 1, 0.4, mode, KernelFamily::Gaussian).unwrap();
            let b = cv_slice(&shifted, &part, 1, 0.4, mode, KernelFamily::Gaussian).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn small_slice_is_rejected() {
        let ds = gaussian_data(8, 3, 5);
        let part = SlicePartition::from_labels(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        assert!(matches!(
            cv_slice(&ds, &part, 0, 1.0, CvMode::PerSlice, KernelFamily::Gaussian),
            Err(DpdrError::SliceTooSmall { size: 4, needed: 5, .. })
        ));
        assert!(matches!(
            select_bandwidth(&ds, &part, Method::Sir, &[1.0], KernelFamily::Gaussian),
            Err(DpdrError::AllCellsInvalid)
        ));
    }

    #[test]
    fn standard_normal_at_mode() {
        let v = mixture_log_density(&DVector::zeros(2), &[(1.0, DVector::zeros(2), DMatrix::identity(2, 2))]).unwrap();
        // the ridge perturbs the identity by 1e-6
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-5);
    }

    #[test]
    fn loglik_matches_direct_evaluation() {
        let x = [0.3, -1.2, 0.8, 2.0, 1.1, -0.4];
        let w = [-0.9, -0.2, 0.1, 0.4, 0.7, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let labels = vec![0, 0, 1, 1, 0, 1];
        let ds = Dataset::from_rows(
            &y,
            &x.iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            &w.iter().map(|&v| vec![v]).collect::<Vec<_>>(),
        )
        .unwrap();
        let part = SlicePartition::from_labels(labels.clone(), 2).unwrap();
        let h = 0.6;
        let got = mixture_loglik(&ds, &part, h, KernelFamily::Gaussian).unwrap();

        let mut expected = 0.0;
        for i in 0..6 {
            let k: Vec<f64> = (0..6).map(|j| (-0.5 * ((w[j] - w[i]) / h).powi(2)).exp()).collect();
            let total: f64 = k.iter().sum();
            let mut density = 0.0;
            for l in 0..2 {
                let idx: Vec<usize> = (0..6).filter(|&j| labels[j] == l).collect();
                let kl: f64 = idx.iter().map(|&j| k[j]).sum();
                let m: f64 = idx.iter().map(|&j| k[j] * x[j]).sum::<f64>() / kl;
                let v: f64 = idx.iter().map(|&j| k[j] * (x[j] - m).powi(2)).sum::<f64>() / kl;
                let v = v * (1.0 + CV_RIDGE);
                density += kl / total * (-(x[i] - m).powi(2) / (2.0 * v)).exp()
                    / (2.0 * std::f64::consts::PI * v).sqrt();
            }
            expected += density.ln();
        }
        assert_eq!(got.used, 6);
        assert!((got.value - expected).abs() < 1e-9, "{} {}", got.value, expected);
    }

    #[test]
    fn loglik_doubles_with_duplicated_rows() {
        let ds = gaussian_data(40, 2, 6);
        let part = SlicePartition::equal_frequency(ds.y().as_slice(), 2).unwrap();
        let rows: Vec<usize> = (0..40).chain(0..40).collect();
        let dup = ds.select_rows(&rows).unwrap();
        let dup_part = SlicePartition::from_labels(rows.iter().map(|&i| part.label(i)).collect(), 2).unwrap();
        let a = mixture_loglik(&ds, &part, 0.5, KernelFamily::Gaussian).unwrap().value;
        let b = mixture_loglik(&dup, &dup_part, 0.5, KernelFamily::Gaussian).unwrap().value;
        assert!((b - 2.0 * a).abs() < 1e-9 * a.abs(), "{a} {b}");
    }

    #[test]
    fn single_point_grid() {
        let ds = gaussian_data(60, 2, 7);
        let part = SlicePartition::equal_frequency(ds.y().as_slice(), 2).unwrap();
        let s = select_bandwidth(&ds, &part, Method::Save, &[0.3], KernelFamily::Gaussian).unwrap();
        assert_eq!(s.h_opt, 0.3);
        assert_eq!(s.per_slice_cv.len(), 2);
    }

    #[test]
    fn independent_w_prefers_widest_bandwidth() {
        let ds = gaussian_data(200, 2, 8);
        let part = SlicePartition::equal_frequency(ds.y().as_slice(), 2).unwrap();
        let grid = geometric_grid(0.05, 5.0, 6).unwrap();
        let s = select_bandwidth(&ds, &part, Method::Save, &grid, KernelFamily::Gaussian).unwrap();
        for h in &s.h_l_star {
            assert_eq!(*h, Some(5.0));
        }
        assert_eq!(s.h_opt, 5.0);
    }

    #[test]
    fn sir_and_save_agree_with_one_slice() {
        let ds = gaussian_data(60, 2, 9);
        let part = SlicePartition::from_labels(vec![0; 60], 1).unwrap();
        let grid = geometric_grid(0.1, 2.0, 5).unwrap();
        let a = select_bandwidth(&ds, &part, Method::Sir, &grid, KernelFamily::Gaussian).unwrap();
        let b = select_bandwidth(&ds, &part, Method::Save, &grid, KernelFamily::Gaussian).unwrap();
        assert_eq!(a.h_opt, b.h_opt);
        for (x, y) in a.per_slice_cv[0].iter().zip(&b.per_slice_cv[0]) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let ds = gaussian_data(80, 3, 10);
        let part = SlicePartition::equal_frequency(ds.y().as_slice(), 3).unwrap();
        let grid = default_grid(&ds);
        let a = select_bandwidth(&ds, &part, Method::Dr, &grid, KernelFamily::Gaussian).unwrap();
        let b = select_bandwidth(&ds, &part, Method::Dr, &grid, KernelFamily::Gaussian).unwrap();
        assert_eq!(a.h_opt, b.h_opt);
        assert!(a.grid.contains(&a.h_opt));
    }
}
