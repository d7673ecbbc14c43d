use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpdr_core::{KernelFamily, Method, ModelId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "dpdr", version, about = "Dynamic partial sufficient dimension reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "dpdr-out")]
    pub out: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Draw a data set from one of the simulation models.
    Simulate(ModelArgs),
    /// Directions, spectrum and dimension at each query point.
    Estimate(EstimateArgs),
    /// Ladle order determination at each query point.
    Order(OrderArgs),
    /// Cross-validated bandwidth search.
    Bandwidth(BandwidthArgs),
    /// Monte Carlo study: order counts and trace correlations.
    Benchmark(BenchmarkArgs),
    /// Distance correlation between the response and reduced predictors.
    Evaluate(EvaluateArgs),
    /// Re-run the command recorded in a `run.json` sidecar.
    #[serde(skip)]
    Replay(ReplayArgs),
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse().map_err(|e: dpdr_core::DpdrError| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Simulation model, I..VI.
    #[arg(long, value_parser = parse_model, default_value = "I")]
    pub model: ModelId,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Where the data come from: a CSV file, or a fresh draw from a model.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// CSV input; when absent, data are simulated from --model.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Comma-separated predictor columns (default: headers starting with x).
    #[arg(long, value_delimiter = ',')]
    pub x_cols: Vec<String>,
    /// Comma-separated covariate columns (default: headers starting with w).
    #[arg(long, value_delimiter = ',')]
    pub w_cols: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Sir,
    Save,
    Dr,
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Sir => vec![Method::Sir],
            MethodArg::Save => vec![Method::Save],
            MethodArg::Dr => vec![Method::Dr],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Gaussian,
    Epan,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Epan => KernelFamily::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HRule {
    /// 1.06 sd(W) n^(-1/5)
    Rot,
    /// Per-slice leave-one-out CV plus the mixture likelihood.
    Cv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SmoothArgs {
    #[arg(long, value_enum, default_value = "sir")]
    pub method: MethodArg,
    /// Number of slices.
    #[arg(long = "H", default_value_t = dpdr_core::DEFAULT_SLICES)]
    pub slices: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// Fixed bandwidth; overrides --h-rule.
    #[arg(long)]
    pub h: Option<f64>,
    /// Candidate bandwidths for CV as min:max:count (geometric).
    #[arg(long)]
    pub h_grid: Option<String>,
    #[arg(long, value_enum, default_value = "cv")]
    pub h_rule: HRule,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct QueryArgs {
    /// Query point, repeatable; comma-separated when w has several coordinates.
    #[arg(long = "w", allow_hyphen_values = true)]
    pub w: Vec<String>,
    /// Query grid min:max:count on every coordinate of w.
    #[arg(long, allow_hyphen_values = true)]
    pub w_grid: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub query: QueryArgs,
    /// Fixed structural dimension; when absent the ladle chooses it.
    #[arg(long)]
    pub d: Option<usize>,
    /// Bootstrap replicates for the ladle (default min(n, 200)).
    #[arg(long = "B")]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OrderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub query: QueryArgs,
    #[arg(long = "B")]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BandwidthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub smooth: SmoothArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub query: QueryArgs,
    /// Monte Carlo repetitions.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Bootstrap replicates per ladle run; 0 skips order determination.
    #[arg(long = "B", default_value_t = 200)]
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub query: QueryArgs,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "B")]
    pub bootstrap: Option<usize>,
    /// A fixed p×d basis (CSV, one row per predictor) to score instead of
    /// estimating one.
    #[arg(long)]
    pub basis: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `run.json` written by an earlier run.
    pub sidecar: PathBuf,
}
