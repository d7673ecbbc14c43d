//! Browser demo. Each export takes plain numbers and returns a JSON string
//! for the page to parse. The plain Rust functions underneath are what the
//! tests call.

use dpdr_core::bandwidth::{default_grid, rule_of_thumb};
use dpdr_core::{
    candidate_matrix, extract_subspace, gen_model, ladle_profile, select_bandwidth, trace_correlation, true_basis,
    Dataset, DpdrError, KernelFamily, KernelSpec, LadleConfig, Method, ModelId, ModelSpec, Result, Seed,
    SlicePartition, DEFAULT_SLICES,
};
use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_method(name: &str) -> Result<Method> {
    match name.to_ascii_lowercase().as_str() {
        "sir" | "dpsir" => Ok(Method::Sir),
        "save" | "dpsave" => Ok(Method::Save),
        "dr" | "dpdr" => Ok(Method::Dr),
        other => Err(DpdrError::InvalidArgument(format!("unknown method `{other}`"))),
    }
}

struct Setup {
    model: ModelId,
    data: Dataset,
    part: SlicePartition,
    method: Method,
    h: f64,
}

/// Simulates, slices, and settles the bandwidth (`h <= 0` means rule of thumb).
fn setup(model: &str, n: usize, p: usize, seed: u64, method: &str, h: f64) -> Result<Setup> {
    let model: ModelId = model.parse()?;
    let data = gen_model(&ModelSpec::new(model, n, p)?, seed)?;
    let y: Vec<f64> = data.y().iter().copied().collect();
    let part = SlicePartition::equal_frequency(&y, DEFAULT_SLICES)?;
    let h = if h > 0.0 { h } else { rule_of_thumb(&data) };
    Ok(Setup {
        model,
        data,
        part,
        method: parse_method(method)?,
        h,
    })
}

/// The query for scan position `t`: `t` itself, or `(t, 0)` when `w` is 2-d.
fn query(model: ModelId, t: f64) -> Vec<f64> {
    let mut w = vec![t];
    w.resize(model.q(), 0.0);
    w
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

#[derive(Debug, Serialize)]
pub struct ScanPoint {
    pub w: Vec<f64>,
    pub d_true: usize,
    pub r2: Option<f64>,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Scan {
    pub h: f64,
    pub points: Vec<ScanPoint>,
}

/// Trace correlation (at the true dimension) and spectrum along `w`.
pub fn scan(model: &str, n: usize, p: usize, seed: u64, method: &str, h: f64, steps: usize) -> Result<Scan> {
    let s = setup(model, n, p, seed, method, h)?;
    let spec = KernelSpec::gaussian(s.h)?;
    let steps = steps.max(2);
    let points = (0..steps)
        .map(|k| {
            let w = query(s.model, -1.0 + 2.0 * k as f64 / (steps - 1) as f64);
            let truth = true_basis(s.model, s.data.p(), &w)?;
            let fit = candidate_matrix(&s.data, &s.part, &w, &spec, s.method)
                .and_then(|c| extract_subspace(&c, truth.d_true));
            let (r2, singular_values) = match fit {
                Ok(est) if truth.d_true > 0 => (
                    trace_correlation(&est.basis(), &truth.basis).ok().map(|t| t.r2),
                    est.singular_values,
                ),
                Ok(est) => (None, est.singular_values),
                Err(_) => (None, Vec::new()),
            };
            Ok(ScanPoint {
                w,
                d_true: truth.d_true,
                r2,
                singular_values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scan { h: s.h, points })
}

#[derive(Debug, Serialize)]
pub struct Ladle {
    pub h: f64,
    pub w: Vec<f64>,
    pub ks: Vec<usize>,
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub g: Vec<f64>,
    pub d_hat: usize,
    pub d_true: usize,
    pub singular_values: Vec<f64>,
    /// Estimated directions (columns) at `d_hat`.
    pub basis: Vec<Vec<f64>>,
    pub true_basis: Vec<Vec<f64>>,
    /// Trace correlation at the true dimension.
    pub r2: Option<f64>,
}

/// Ladle profile at one query, with estimated and true directions.
#[allow(clippy::too_many_arguments)]
pub fn ladle(model: &str, n: usize, p: usize, seed: u64, method: &str, h: f64, w: f64, b: usize) -> Result<Ladle> {
    let s = setup(model, n, p, seed, method, h)?;
    let w = query(s.model, w);
    let truth = true_basis(s.model, s.data.p(), &w)?;
    let spec = KernelSpec::gaussian(s.h)?;
    let config = LadleConfig::new(Seed(seed).child(1).0).with_replicates(b.max(1));
    let prof = ladle_profile(&s.data, &s.part, &w, &spec, s.method, &config)?;
    let r2 = (truth.d_true > 0)
        .then(|| trace_correlation(&prof.estimate.leading(truth.d_true), &truth.basis).ok())
        .flatten()
        .map(|t| t.r2);
    Ok(Ladle {
        h: s.h,
        w,
        basis: columns(&prof.estimate.basis()),
        true_basis: columns(&truth.basis),
        singular_values: prof.estimate.singular_values.clone(),
        ks: prof.ks,
        f: prof.f,
        phi: prof.phi,
        g: prof.g,
        d_hat: prof.d_hat,
        d_true: truth.d_true,
        r2,
    })
}

#[derive(Debug, Serialize)]
pub struct Bandwidth {
    pub h_rot: f64,
    pub grid: Vec<f64>,
    pub per_slice_cv: Vec<Vec<Option<f64>>>,
    pub candidates: Vec<f64>,
    pub loglik: Vec<f64>,
    pub h_opt: f64,
}

/// CV curves per slice and the likelihood choice among their minimisers.
pub fn bandwidth(model: &str, n: usize, p: usize, seed: u64, method: &str) -> Result<Bandwidth> {
    let s = setup(model, n, p, seed, method, 0.0)?;
    let grid = default_grid(&s.data);
    let search = select_bandwidth(&s.data, &s.part, s.method, &grid, KernelFamily::Gaussian)?;
    Ok(Bandwidth {
        h_rot: s.h,
        grid: search.grid,
        per_slice_cv: search.per_slice_cv,
        candidates: search.candidates,
        loglik: search.loglik.iter().map(|l| l.value).collect(),
        h_opt: search.h_opt,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scan)]
pub fn scan_json(
    model: &str,
    n: usize,
    p: usize,
    seed: u32,
    method: &str,
    h: f64,
    steps: usize,
) -> std::result::Result<String, JsError> {
    to_js(scan(model, n, p, seed.into(), method, h, steps))
}

#[wasm_bindgen(js_name = ladle)]
#[allow(clippy::too_many_arguments)]
pub fn ladle_json(
    model: &str,
    n: usize,
    p: usize,
    seed: u32,
    method: &str,
    h: f64,
    w: f64,
    b: usize,
) -> std::result::Result<String, JsError> {
    to_js(ladle(model, n, p, seed.into(), method, h, w, b))
}

#[wasm_bindgen(js_name = bandwidth)]
pub fn bandwidth_json(model: &str, n: usize, p: usize, seed: u32, method: &str) -> std::result::Result<String, JsError> {
    to_js(bandwidth(model, n, p, seed.into(), method))
}
