//! Dynamic partial SIR, SAVE and DR candidate matrices at a query point, and
//! subspace extraction from `Ĝ(w) = Σ̂_w⁻¹ M̂(w)` by SVD.
//!
//! The candidate matrices are built from moments centred at `m̂(w)`. For SIR
//! and SAVE this is algebraically identical to the uncentred expressions;
//! for DR it is what makes the second-moment expansion location invariant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SlicePartition};
use crate::error::{DpdrError, Result};
use crate::kernel::{ConditionalMoments, KernelSpec};
use crate::linalg::{ridge_cholesky, sorted_svd, symmetrize, symmetrized, ESTIMATOR_RIDGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sir,
    Save,
    Dr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sir, Method::Save, Method::Dr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sir => "DPSIR",
            Method::Save => "DPSAVE",
            Method::Dr => "DPDR",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = DpdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sir" | "dpsir" => Ok(Method::Sir),
            "save" | "dpsave" => Ok(Method::Save),
            "dr" | "dpdr" => Ok(Method::Dr),
            other => Err(DpdrError::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

struct Centered {
    probs: Vec<f64>,
    /// `V̂_l − m̂`
    means: Vec<DVector<f64>>,
    /// `E[(X − m̂)(X − m̂)ᵀ | slice l, w]`
    seconds: Vec<DMatrix<f64>>,
    cov: DMatrix<f64>,
}

fn centered(moments: &ConditionalMoments) -> Centered {
    let m = &moments.mean;
    let mm = m * m.transpose();
    let mut means = Vec::with_capacity(moments.n_slices());
    let mut seconds = Vec::with_capacity(moments.n_slices());
    for l in 0..moments.n_slices() {
        let v = moments.slice_mean_ratio(l);
        let vm = &v * m.transpose();
        let r = moments.slice_second_ratio(l) - &vm - vm.transpose() + &mm;
        means.push(v - m);
        seconds.push(symmetrized(r));
    }
    Centered {
        probs: moments.probs.clone(),
        means,
        seconds,
        cov: moments.cov.clone(),
    }
}

fn between_slices(c: &Centered) -> DMatrix<f64> {
    let p = c.cov.nrows();
    let mut s = DMatrix::zeros(p, p);
    for (v, &pl) in c.means.iter().zip(&c.probs) {
        s.ger(pl, v, v, 1.0);
    }
    symmetrized(s)
}

/// `M̂_SIR(w) = Σ_l Û_l Û_lᵀ / p̂_l − m̂ m̂ᵀ`, evaluated as the between-slice
/// covariance `Σ_l p̂_l (V̂_l − m̂)(V̂_l − m̂)ᵀ`.
pub fn m_sir(moments: &ConditionalMoments) -> DMatrix<f64> {
    between_slices(&centered(moments))
}

/// `M̂_SAVE(w) = Σ_l p̂_l (Σ̂_w − R̂_l + V̂_l V̂_lᵀ)²`.
pub fn m_save(moments: &ConditionalMoments) -> DMatrix<f64> {
    let c = centered(moments);
    let p = c.cov.nrows();
    let mut out = DMatrix::zeros(p, p);
    for l in 0..c.probs.len() {
        let v = &c.means[l];
        let mut inner = &c.cov - &c.seconds[l];
        inner.ger(1.0, v, v, 1.0);
        symmetrize(&mut inner);
        out += (&inner * &inner) * c.probs[l];
    }
    symmetrized(out)
}

/// `M̂_DR(w) = 2 Σ_l p̂_l (R̂_l − Σ̂_w)² + 2 S² + 2 (Σ_l p̂_l V̂_lᵀ V̂_l) S` with
/// `S = Σ_l p̂_l V̂_l V̂_lᵀ`, all moments centred at `m̂(w)`.
pub fn m_dr(moments: &ConditionalMoments) -> DMatrix<f64> {
    let c = centered(moments);
    let p = c.cov.nrows();
    let mut first = DMatrix::zeros(p, p);
    for l in 0..c.probs.len() {
        let d = symmetrized(&c.seconds[l] - &c.cov);
        first += (&d * &d) * c.probs[l];
    }
    let s = between_slices(&c);
    let spread: f64 = c
        .means
        .iter()
        .zip(&c.probs)
        .map(|(v, &pl)| pl * v.norm_squared())
        .sum();
    let out = first * 2.0 + (&s * &s) * 2.0 + &s * (2.0 * spread);
    symmetrized(out)
}

/// Dispatches to [`m_sir`], [`m_save`] or [`m_dr`].
pub fn kernel_matrix(moments: &ConditionalMoments, method: Method) -> DMatrix<f64> {
    match method {
        Method::Sir => m_sir(moments),
        Method::Save => m_save(moments),
        Method::Dr => m_dr(moments),
    }
}

/// `Ĝ(w) = Σ̂_w⁻¹ M̂(w)` together with its factors.
#[derive(Debug, Clone)]
pub struct CandidateMatrix {
    pub method: Method,
    pub query: Vec<f64>,
    pub m: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl CandidateMatrix {
    /// Builds `Ĝ` from already estimated moments. `Σ̂_w` gets a ridge of
    /// `1e-8 · trace/p` before inversion.
    pub fn from_moments(moments: &ConditionalMoments, method: Method) -> Result<Self> {
        let m = kernel_matrix(moments, method);
        let chol = ridge_cholesky(&moments.cov, ESTIMATOR_RIDGE)?;
        let g = chol.solve(&m);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(DpdrError::SingularCovariance);
        }
        Ok(Self {
            method,
            query: moments.query.clone(),
            m,
            sigma: moments.cov.clone(),
            g,
        })
    }

    /// Wraps a given `Ĝ` (identity `Σ̂`), mainly for tests and tooling.
    pub fn from_g(g: DMatrix<f64>, method: Method) -> Self {
        let p = g.nrows();
        Self {
            method,
            query: Vec::new(),
            m: g.clone(),
            sigma: DMatrix::identity(p, p),
            g,
        }
    }

    pub fn p(&self) -> usize {
        self.g.nrows()
    }
}

/// Estimates moments at `query` and forms the candidate matrix.
pub fn candidate_matrix(
    data: &Dataset,
    partition: &SlicePartition,
    query: &[f64],
    spec: &KernelSpec,
    method: Method,
) -> Result<CandidateMatrix> {
    let moments = ConditionalMoments::estimate(data, partition, query, spec)?;
    CandidateMatrix::from_moments(&moments, method)
}

/// The SVD of `Ĝ(w)` truncated to a chosen dimension.
#[derive(Debug, Clone, Serialize)]
pub struct SubspaceEstimate {
    pub method: Method,
    pub query: Vec<f64>,
    /// `λ̂_1 ≥ … ≥ λ̂_p ≥ 0`.
    pub singular_values: Vec<f64>,
    /// All `p` left singular vectors `β̂_k` as columns.
    #[serde(skip)]
    pub directions: DMatrix<f64>,
    pub dimension: usize,
}

impl SubspaceEstimate {
    /// `B̂(w)`: the first `dimension` directions.
    pub fn basis(&self) -> DMatrix<f64> {
        self.directions.columns(0, self.dimension).into_owned()
    }

    /// The first `k` directions, `T̂_k`.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.directions.columns(0, k).into_owned()
    }
}

/// Full SVD of `Ĝ`; the basis is its first `d` left singular vectors.
pub fn extract_subspace(candidate: &CandidateMatrix, d: usize) -> Result<SubspaceEstimate> {
    let p = candidate.p();
    if d > p {
        return Err(DpdrError::InvalidArgument(format!("dimension {d} exceeds p = {p}")));
    }
    let (singular_values, directions) = sorted_svd(&candidate.g)?;
    Ok(SubspaceEstimate {
        method: candidate.method,
        query: candidate.query.clone(),
        singular_values,
        directions,
        dimension: d,
    })
}
