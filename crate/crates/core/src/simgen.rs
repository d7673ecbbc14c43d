//! Samplers for the six benchmark models and their true dynamic subspaces.
//!
//! For Models I to V, `W ~ U(−1, 1)`; for Model VI, `W = (W₁, W₂)` with i.i.d.
//! `U(−1, 1)` coordinates. Given `W`, `X ~ N_p(c(W)·1_p, Σ_W)` where `Σ_W`
//! has unit diagonal and constant off-diagonal `ρ(W)`.
//!
//! The equicorrelation matrix `(1−ρ)I + ρ11ᵀ` has eigenvalues `1−ρ` (on
//! `1_p^⊥`) and `1+(p−1)ρ` (on `1_p`). The second is negative whenever
//! `ρ < −1/(p−1)`, which the stated laws reach (e.g. `ρ = ½ sin(−1) ≈ −0.42`
//! at `p = 5`). Draws use the spectral square root with negative eigenvalues
//! clipped to zero, so the sampler is exact where `Σ_W` is PD and returns the
//! nearest PSD law elsewhere.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DpdrError, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::I,
        ModelId::II,
        ModelId::III,
        ModelId::IV,
        ModelId::V,
        ModelId::VI,
    ];

    pub fn q(self) -> usize {
        if self == ModelId::VI {
            2
        } else {
            1
        }
    }

    pub fn min_p(self) -> usize {
        if self == ModelId::IV {
            3
        } else {
            2
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelId::I => "I",
            ModelId::II => "II",
            ModelId::III => "III",
            ModelId::IV => "IV",
            ModelId::V => "V",
            ModelId::VI => "VI",
        }
    }

    /// `(c(w), ρ(w))`: the mean is `c(w)·1_p`, the off-diagonal covariance `ρ(w)`.
    pub fn predictor_law(self, w: &[f64]) -> (f64, f64) {
        let c = match self {
            ModelId::VI => 0.5 * (w[0].sin() + w[1].cos()),
            _ => 0.5 * w[0].sin(),
        };
        (c, c)
    }

    /// The regression function with noise term `eps` (already scaled).
    pub fn response(self, x: &[f64], w: &[f64], eps: f64) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        let w0 = w[0];
        let signal = match self {
            ModelId::I => x1 * w0.abs() + 3.0 * x2 * w0.cos(),
            ModelId::II => {
                let a = x1 * w0.exp() - x2 * w0.cos() + 1.0;
                let b = 0.01 * x1 * w0.cos() + 2.0 * (w0 + 1.0).powi(2) * x2;
                2.0 * a.exp() * sign(b)
            }
            ModelId::III => (x1 * w0.sin() + 5.0 * x2 * w0.cos()).powi(2),
            ModelId::IV => {
                let a = x1 * w0.abs() + x2;
                (a * a).exp() * (x[2] * w0.cos()).powi(2).ln()
            }
            ModelId::V => {
                10.0 * (x1 * w0.sin() + 5.0 * x2 * w0.abs()).exp() / (x1 * w0.exp() - x2 * w0.cos())
            }
            ModelId::VI => {
                let w1 = w[1];
                (x1 * (w1 + 10.0) + x2 * w0.sin() + 7.0) / (x1 * w0.exp() + 10.0 * x2 * w1.cos())
            }
        };
        signal + eps
    }

    /// Coefficient vectors of the model's linear indices in `x`, before
    /// orthonormalisation (zero vectors included).
    pub fn index_vectors(self, w: &[f64], p: usize) -> Vec<DVector<f64>> {
        let v = |coef: &[f64]| {
            let mut out = DVector::zeros(p);
            out.rows_mut(0, coef.len()).copy_from_slice(coef);
            out
        };
        let w0 = w[0];
        match self {
            ModelId::I => vec![v(&[w0.abs(), 3.0 * w0.cos()])],
            ModelId::II => vec![
                v(&[w0.exp(), -w0.cos()]),
                v(&[0.01 * w0.cos(), 2.0 * (w0 + 1.0).powi(2)]),
            ],
            ModelId::III => vec![v(&[w0.sin(), 5.0 * w0.cos()])],
            ModelId::IV => vec![v(&[w0.abs(), 1.0, 0.0]), v(&[0.0, 0.0, w0.cos()])],
            ModelId::V => vec![v(&[w0.sin(), 5.0 * w0.abs()]), v(&[w0.exp(), -w0.cos()])],
            ModelId::VI => vec![v(&[w[1] + 10.0, w0.sin()]), v(&[w0.exp(), 10.0 * w[1].cos()])],
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelId {
    type Err = DpdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelId::I),
            "II" | "2" => Ok(ModelId::II),
            "III" | "3" => Ok(ModelId::III),
            "IV" | "4" => Ok(ModelId::IV),
            "V" | "5" => Ok(ModelId::V),
            "VI" | "6" => Ok(ModelId::VI),
            other => Err(DpdrError::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// A simulation design: model, sample size, predictor dimension, noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelId,
    pub n: usize,
    pub p: usize,
    pub noise: f64,
}

impl ModelSpec {
    pub fn new(model: ModelId, n: usize, p: usize) -> Result<Self> {
        let spec = Self {
            model,
            n,
            p,
            noise: 0.2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < self.model.min_p() {
            return Err(DpdrError::InvalidArgument(format!(
                "model {} needs p >= {}, got {}",
                self.model,
                self.model.min_p(),
                self.p
            )));
        }
        if self.n < 2 {
            return Err(DpdrError::InvalidArgument(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(DpdrError::InvalidArgument("noise scale must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_support(model: ModelId, w: &[f64]) -> Result<()> {
    if w.len() != model.q() || w.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(DpdrError::OffSupport {
            model: model.to_string(),
            query: w.to_vec(),
        });
    }
    Ok(())
}

/// The PSD-clipped covariance actually sampled at `w`.
pub fn predictor_covariance(model: ModelId, w: &[f64], p: usize) -> DMatrix<f64> {
    let (_, rho) = model.predictor_law(w);
    let ones = DMatrix::from_element(p, p, 1.0 / p as f64);
    let top = (1.0 + (p as f64 - 1.0) * rho).max(0.0);
    (DMatrix::identity(p, p) - &ones) * (1.0 - rho) + ones * top
}

/// Draws `x | W = w` for the given design.
pub fn sample_predictors<R: Rng + ?Sized>(spec: &ModelSpec, w: &[f64], rng: &mut R) -> Result<DVector<f64>> {
    check_support(spec.model, w)?;
    let p = spec.p;
    let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    Ok(DVector::from_vec(equicorrelated(spec.model, w, &z)))
}

fn equicorrelated(model: ModelId, w: &[f64], z: &[f64]) -> Vec<f64> {
    let p = z.len() as f64;
    let (c, rho) = model.predictor_law(w);
    let off = (1.0 - rho).sqrt();
    let top = (1.0 + (p - 1.0) * rho).max(0.0).sqrt();
    let zbar = z.iter().sum::<f64>() / p;
    let along = (top - off) * zbar;
    z.iter().map(|zi| c + off * zi + along).collect()
}

/// Simulates `spec.n` rows: `W`, then `X | W`, then `Y`.
pub fn gen_model(spec: &ModelSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Seed(seed).rng();
    let (n, p, q) = (spec.n, spec.p, spec.model.q());
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * p);
    let mut w = Vec::with_capacity(n * q);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        let wi: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let xi = equicorrelated(spec.model, &wi, &z);
        let eps: f64 = StandardNormal.sample(&mut rng);
        y.push(spec.model.response(&xi, &wi, spec.noise * eps));
        x.extend_from_slice(&xi);
        w.extend_from_slice(&wi);
    }
    Dataset::new(
        DVector::from_vec(y),
        DMatrix::from_row_slice(n, p, &x),
        DMatrix::from_row_slice(n, q, &w),
    )
}

/// Ground-truth dynamic subspace at one query point.
#[derive(Debug, Clone)]
pub struct TrueSubspace {
    pub w: Vec<f64>,
    pub d_true: usize,
    /// Orthonormal `p × d_true` basis.
    pub basis: DMatrix<f64>,
}

/// Orthonormalises the model's index directions at `w`. Vanishing index
/// vectors (Model V at `w = 0`) drop out, lowering the dimension.
pub fn true_basis(model: ModelId, p: usize, w: &[f64]) -> Result<TrueSubspace> {
    check_support(model, w)?;
    if p < model.min_p() {
        return Err(DpdrError::InvalidArgument(format!("model {model} needs p >= {}", model.min_p())));
    }
    let raw = model.index_vectors(w, p);
    let scale = raw.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for v in raw {
        let mut r = v.clone();
        for c in &cols {
            r -= c * c.dot(&r);
        }
        let norm = r.norm();
        if norm > 1e-12 * scale {
            cols.push(r / norm);
        }
    }
    let basis = DMatrix::from_columns(&cols);
    Ok(TrueSubspace {
        w: w.to_vec(),
        d_true: cols.len(),
        basis,
    })
}
