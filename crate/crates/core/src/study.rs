//! Monte Carlo benchmark harness: repeat simulate → estimate and tabulate
//! order-determination counts and trace correlations per (model, w, method).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bandwidth::{default_grid, rule_of_thumb, select_bandwidth};
use crate::data::{Dataset, SlicePartition, DEFAULT_SLICES};
use crate::error::{DpdrError, Result};
use crate::kernel::{ConditionalMoments, KernelFamily, KernelSpec};
use crate::ladle::{ladle_profile, LadleConfig};
use crate::metrics::trace_correlation;
use crate::sdr::{extract_subspace, CandidateMatrix, Method};
use crate::seed::Seed;
use crate::simgen::{gen_model, true_basis, ModelId, ModelSpec};

/// How each replicate's bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(f64),
    /// A multiple of `1.06 · sd(W) · n^(-1/5)`.
    RuleOfThumb(f64),
    /// Leave-one-out CV over the default grid, per method.
    Cv,
}

impl BandwidthRule {
    pub fn resolve(&self, data: &Dataset, partition: &SlicePartition, method: Method, family: KernelFamily) -> Result<f64> {
        match *self {
            BandwidthRule::Fixed(h) => Ok(h),
            BandwidthRule::RuleOfThumb(scale) => Ok(scale * rule_of_thumb(data)),
            BandwidthRule::Cv => Ok(select_bandwidth(data, partition, method, &default_grid(data), family)?.h_opt),
        }
    }
}

/// One simulation study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub model: ModelId,
    pub n: usize,
    pub p: usize,
    pub slices: usize,
    pub methods: Vec<Method>,
    pub points: Vec<Vec<f64>>,
    pub reps: usize,
    /// Bootstrap size per ladle run; `None` skips order determination.
    pub bootstrap: Option<usize>,
    pub bandwidth: BandwidthRule,
    pub family: KernelFamily,
    pub seed: u64,
}

impl StudyConfig {
    /// Defaults: H = 5, every method, the standard query grid for the model, B = 200.
    pub fn new(model: ModelId, n: usize, p: usize, reps: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            p,
            slices: DEFAULT_SLICES,
            methods: Method::ALL.to_vec(),
            points: default_points(model),
            reps,
            bootstrap: Some(200),
            bandwidth: BandwidthRule::RuleOfThumb(1.0),
            family: KernelFamily::Gaussian,
            seed,
        }
    }
}

/// `{−1, −0.5, 0, 0.5, 1}`, or its 5×5 product for Model VI.
pub fn default_points(model: ModelId) -> Vec<Vec<f64>> {
    let axis = [-1.0, -0.5, 0.0, 0.5, 1.0];
    if model.q() == 2 {
        axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect()
    } else {
        axis.iter().map(|&a| vec![a]).collect()
    }
}

/// Outcome of one (replicate, w, method) evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trial {
    pub d_true: usize,
    pub d_hat: Option<usize>,
    pub r2: Option<f64>,
    pub bandwidth: f64,
}

/// Aggregate over replicates for one (w, method).
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub model: ModelId,
    pub w: Vec<f64>,
    pub method: Method,
    pub d_true: usize,
    pub reps: usize,
    /// Replicates whose ladle run succeeded.
    pub order_runs: usize,
    pub correct: usize,
    pub correct_se: f64,
    pub r2_runs: usize,
    pub mean_r2: f64,
    pub r2_se: f64,
    pub median_r2: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub config: StudyConfig,
    pub cells: Vec<CellSummary>,
    pub elapsed_secs: f64,
    /// True when some cell had failed replicates.
    pub partial: bool,
}

/// Runs every method at every point on one simulated data set.
pub fn run_replicate(config: &StudyConfig, rep: usize) -> Result<Vec<Vec<Trial>>> {
    let spec = ModelSpec::new(config.model, config.n, config.p)?;
    let rep_seed = Seed(config.seed).child(rep as u64);
    let data = gen_model(&spec, rep_seed.0)?;
    let partition = SlicePartition::equal_frequency(data.y().as_slice(), config.slices)?;
    let bandwidths = config
        .methods
        .iter()
        .map(|&m| config.bandwidth.resolve(&data, &partition, m, config.family))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::with_capacity(config.points.len());
    for (j, w) in config.points.iter().enumerate() {
        let truth = true_basis(config.model, config.p, w)?;
        let mut row = Vec::with_capacity(config.methods.len());
        for (m, &method) in config.methods.iter().enumerate() {
            let h = bandwidths[m];
            let spec = KernelSpec::new(config.family, h)?;
            let mut trial = Trial {
                d_true: truth.d_true,
                d_hat: None,
                r2: None,
                bandwidth: h,
            };
            if let Some(b) = config.bootstrap {
                let cfg = LadleConfig {
                    replicates: Some(b),
                    k_max: None,
                    seed: rep_seed.child(1 + (j * config.methods.len() + m) as u64),
                };
                trial.d_hat = ladle_profile(&data, &partition, w, &spec, method, &cfg).ok().map(|l| l.d_hat);
            }
            trial.r2 = ConditionalMoments::estimate(&data, &partition, w, &spec)
                .and_then(|mo| CandidateMatrix::from_moments(&mo, method))
                .and_then(|c| extract_subspace(&c, truth.d_true))
                .and_then(|e| trace_correlation(&e.basis(), &truth.basis))
                .ok()
                .map(|d| d.r2);
            row.push(trial);
        }
        out.push(row);
    }
    Ok(out)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Runs `config.reps` replicates with derived seeds and aggregates them.
pub fn run_study(config: &StudyConfig) -> Result<BenchmarkReport> {
    ModelSpec::new(config.model, config.n, config.p)?;
    if config.reps == 0 || config.methods.is_empty() || config.points.is_empty() {
        return Err(DpdrError::InvalidArgument("study needs reps, methods and points".into()));
    }
    let start = Instant::now();
    #[cfg(feature = "parallel")]
    let reps: Vec<Result<Vec<Vec<Trial>>>> = {
        use rayon::prelude::*;
        (0..config.reps).into_par_iter().map(|r| run_replicate(config, r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let reps: Vec<Result<Vec<Vec<Trial>>>> = (0..config.reps).map(|r| run_replicate(config, r)).collect();

    let mut cells = Vec::new();
    for (j, w) in config.points.iter().enumerate() {
        let d_true = true_basis(config.model, config.p, w)?.d_true;
        for (m, &method) in config.methods.iter().enumerate() {
            let trials: Vec<&Trial> = reps.iter().filter_map(|r| r.as_ref().ok()).map(|r| &r[j][m]).collect();
            let orders: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.d_hat.map(|d| f64::from(u8::from(d == t.d_true))))
                .collect();
            let r2: Vec<f64> = trials.iter().filter_map(|t| t.r2).collect();
            let (_, rate_se) = mean_se(&orders);
            let (mean_r2, r2_se) = mean_se(&r2);
            let order_fail = if config.bootstrap.is_some() { trials.len() - orders.len() } else { 0 };
            cells.push(CellSummary {
                model: config.model,
                w: w.clone(),
                method,
                d_true,
                reps: config.reps,
                order_runs: orders.len(),
                correct: orders.iter().filter(|&&v| v == 1.0).count(),
                correct_se: if orders.is_empty() { f64::NAN } else { rate_se * config.reps as f64 },
                r2_runs: r2.len(),
                mean_r2,
                r2_se,
                median_r2: median(&r2),
                failures: (config.reps - trials.len()) + order_fail.max(trials.len() - r2.len()),
            });
        }
    }
    let partial = cells.iter().any(|c| c.failures > 0);
    Ok(BenchmarkReport {
        config: config.clone(),
        cells,
        elapsed_secs: start.elapsed().as_secs_f64(),
        partial,
    })
}

fn fmt_w(w: &[f64]) -> String {
    w.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

impl BenchmarkReport {
    /// Long-format CSV, one row per (w, method).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,n,p,w,method,d_true,reps,order_runs,correct,correct_se,r2_runs,mean_r2,r2_se,median_r2,failures\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{:.4},{},{:.6},{:.6},{:.6},{}\n",
                c.model,
                self.config.n,
                self.config.p,
                fmt_w(&c.w),
                c.method.name(),
                c.d_true,
                c.reps,
                c.order_runs,
                c.correct,
                c.correct_se,
                c.r2_runs,
                c.mean_r2,
                c.r2_se,
                c.median_r2,
                c.failures
            ));
        }
        out
    }

    /// Correct-order counts as a Markdown table, points down, methods across.
    pub fn order_table_markdown(&self) -> String {
        self.markdown(|c| format!("{} ({:.1})", c.correct, c.correct_se))
    }

    /// Mean trace correlations as a Markdown table.
    pub fn r2_table_markdown(&self) -> String {
        self.markdown(|c| format!("{:.3} ({:.3})", c.mean_r2, c.r2_se))
    }

    fn markdown(&self, cell: impl Fn(&CellSummary) -> String) -> String {
        let methods = &self.config.methods;
        let mut out = format!(
            "Model {}, (n, p) = ({}, {}), {} runs\n\n| w |",
            self.config.model, self.config.n, self.config.p, self.config.reps
        );
        for m in methods {
            out.push_str(&format!(" {} |", m.name()));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(methods.len()));
        out.push('\n');
        for w in &self.config.points {
            out.push_str(&format!("| {} |", fmt_w(w)));
            for m in methods {
                let c = self.cells.iter().find(|c| &c.w == w && c.method == *m).expect("cell exists");
                out.push_str(&format!(" {} |", cell(c)));
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, w: &[f64], method: Method) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.w == w && c.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_single_replicate() {
        let mut cfg = StudyConfig::new(ModelId::I, 100, 4, 1, 5);
        cfg.bootstrap = Some(10);
        let rep = run_study(&cfg).unwrap();
        assert_eq!(rep.cells.len(), 15);
        for c in &rep.cells {
            assert!(c.correct <= c.reps);
            assert!((0.0..=1.0).contains(&c.mean_r2));
        }
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 16);
        assert!(rep.order_table_markdown().contains("| 0 |"));
        assert!(rep.r2_table_markdown().contains("DPSAVE"));
    }

    #[test]
    fn replicates_do_not_depend_on_count() {
        let mut cfg = StudyConfig::new(ModelId::III, 80, 4, 3, 9);
        cfg.bootstrap = Some(5);
        cfg.points = vec![vec![0.5]];
        let a = run_replicate(&cfg, 2).unwrap();
        cfg.reps = 10;
        let b = run_replicate(&cfg, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_vi_grid() {
        assert_eq!(default_points(ModelId::VI).len(), 25);
        assert_eq!(default_points(ModelId::II).len(), 5);
    }
}
