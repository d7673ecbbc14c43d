//! Dynamic partial sufficient dimension reduction.
//!
//! Given a response `y`, predictors `x` and shielded covariates `w`, the
//! estimators here recover a basis `B(w)` for the directions of `x` that
//! carry the information about `y` at each fixed value of `w`, using
//! kernel-smoothed versions of sliced inverse regression (SIR), sliced
//! average variance estimation (SAVE) and directional regression (DR).
//!
//! ```
//! use dpdr_core::{gen_model, KernelSpec, Method, ModelId, ModelSpec, SlicePartition};
//! use dpdr_core::{candidate_matrix, extract_subspace, true_basis, trace_correlation};
//!
//! let data = gen_model(&ModelSpec::new(ModelId::I, 400, 5).unwrap(), 1).unwrap();
//! let slices = SlicePartition::equal_frequency(data.y().as_slice(), 5).unwrap();
//! let kernel = KernelSpec::gaussian(0.2).unwrap();
//! let g = candidate_matrix(&data, &slices, &[0.5], &kernel, Method::Sir).unwrap();
//! let est = extract_subspace(&g, 1).unwrap();
//! let truth = true_basis(ModelId::I, 5, &[0.5]).unwrap();
//! assert!(trace_correlation(&est.basis(), &truth.basis).unwrap().r2 > 0.8);
//! ```

pub mod bandwidth;
pub mod data;
pub mod error;
pub mod kernel;
pub mod ladle;
pub mod linalg;
pub mod metrics;
pub mod sdr;
pub mod seed;
pub mod simgen;
pub mod study;

pub use bandwidth::{cv_slice, mixture_loglik, select_bandwidth, BandwidthSearch, CvMode};
pub use data::{load_dataset, read_dataset, read_headers, ColumnSchema, Dataset, SlicePartition, DEFAULT_SLICES};
pub use error::{DpdrError, Result};
pub use kernel::{ConditionalMoments, KernelFamily, KernelSpec};
pub use ladle::{estimate_order, ladle_profile, LadleConfig, LadleProfile};
pub use metrics::{distance_correlation, trace_correlation, SubspaceDistance};
pub use sdr::{candidate_matrix, extract_subspace, CandidateMatrix, Method, SubspaceEstimate};
pub use seed::Seed;
pub use simgen::{gen_model, true_basis, ModelId, ModelSpec, TrueSubspace};
pub use study::{run_study, BandwidthRule, BenchmarkReport, StudyConfig};
