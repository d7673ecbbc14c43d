//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported
//! but only turn into a non-zero exit when `DPDR_ACCEPTANCE_STRICT=1`.

mod common;

use std::time::Instant;

use common::*;
use dpdr_core::linalg::{asymmetry, min_eigenvalue};
use dpdr_core::sdr::kernel_matrix;
use dpdr_core::study::{run_study, BandwidthRule, StudyConfig};
use dpdr_core::{
    candidate_matrix, distance_correlation, extract_subspace, gen_model, ladle_profile, trace_correlation,
    true_basis, ConditionalMoments, KernelFamily, KernelSpec, LadleConfig, Method, ModelId, ModelSpec,
    SlicePartition,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const REPS: usize = 100;
const BOOT: usize = 200;
/// Bandwidth used by the Monte Carlo criteria.
const RULE: BandwidthRule = BandwidthRule::Cv;

const ORDER_MIN_SIR: usize = 95;
const ORDER_MAX_SIR_III: usize = 25;
const ORDER_MIN_SAVE_III: usize = 90;
const ORDER_MIN_V_AWAY: usize = 90;
const ORDER_V_SLACK: f64 = 10.0;
const ORDER_MIN_V_LARGE_N: usize = 80;
const R2_TOL: f64 = 0.05;
const R2_MAX_SIR_III: f64 = 0.40;
const ORACLE_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-8;
const SIMPLEX_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn study(model: ModelId, n: usize, methods: &[Method], points: Vec<Vec<f64>>, bootstrap: Option<usize>) -> StudyConfig {
    let mut cfg = StudyConfig::new(model, n, 5, REPS, SEED);
    cfg.methods = methods.to_vec();
    cfg.points = points;
    cfg.bootstrap = bootstrap;
    cfg.bandwidth = RULE;
    cfg
}

fn count(model: ModelId, n: usize, method: Method, w: f64) -> (usize, f64) {
    let rep = run_study(&study(model, n, &[method], vec![vec![w]], Some(BOOT))).unwrap();
    let c = &rep.cells[0];
    (c.correct, c.correct_se)
}

fn order_at_zero() -> Outcome {
    let (i, i_se) = count(ModelId::I, 150, Method::Sir, 0.0);
    let (ii, ii_se) = count(ModelId::II, 150, Method::Sir, 0.0);
    let cfg = study(ModelId::III, 150, &[Method::Sir, Method::Save], vec![vec![0.0]], Some(BOOT));
    let rep = run_study(&cfg).unwrap();
    let (iii_sir, iii_save) = (&rep.cells[0], &rep.cells[1]);
    let pass = i >= ORDER_MIN_SIR
        && ii >= ORDER_MIN_SIR
        && iii_sir.correct <= ORDER_MAX_SIR_III
        && iii_save.correct >= ORDER_MIN_SAVE_III;
    outcome(
        pass,
        format!(
            "I/DPSIR {i}±{i_se:.1} (>= {ORDER_MIN_SIR}), II/DPSIR {ii}±{ii_se:.1} (>= {ORDER_MIN_SIR}), \
             III/DPSIR {}±{:.1} (<= {ORDER_MAX_SIR_III}), III/DPSAVE {}±{:.1} (>= {ORDER_MIN_SAVE_III})",
            iii_sir.correct, iii_sir.correct_se, iii_save.correct, iii_save.correct_se
        ),
    )
}

fn dynamic_dimension() -> Outcome {
    let away = [-1.0, -0.5, 0.5, 1.0];
    let rep = run_study(&study(
        ModelId::V,
        150,
        &[Method::Sir],
        away.iter().map(|&w| vec![w]).collect(),
        Some(BOOT),
    ))
    .unwrap();
    let away_counts: Vec<usize> = rep.cells.iter().map(|c| c.correct).collect();
    let away_ok = away_counts.iter().all(|&c| c >= ORDER_MIN_V_AWAY);

    let sizes = [150, 500, 800, 1000];
    let zero: Vec<usize> = sizes.iter().map(|&n| count(ModelId::V, n, Method::Sir, 0.0).0).collect();
    let monotone = zero.windows(2).all(|p| p[1] as f64 >= p[0] as f64 - ORDER_V_SLACK);
    let reaches = *zero.last().unwrap() >= ORDER_MIN_V_LARGE_N;
    outcome(
        away_ok && monotone && reaches,
        format!(
            "d=2 counts at w=-1,-0.5,0.5,1: {away_counts:?} (each >= {ORDER_MIN_V_AWAY}); \
             d=1 counts at w=0 for n={sizes:?}: {zero:?} (nondecreasing within {ORDER_V_SLACK}, last >= {ORDER_MIN_V_LARGE_N})"
        ),
    )
}

fn mean_r2(model: ModelId, methods: &[Method], w: Vec<f64>) -> Vec<(f64, f64)> {
    let rep = run_study(&study(model, 150, methods, vec![w], None)).unwrap();
    rep.cells.iter().map(|c| (c.mean_r2, c.r2_se)).collect()
}

fn subspace_accuracy() -> Outcome {
    let i = mean_r2(ModelId::I, &[Method::Sir], vec![0.0])[0];
    let iii = mean_r2(ModelId::III, &[Method::Sir, Method::Save], vec![0.0]);
    let iv = mean_r2(ModelId::IV, &[Method::Dr], vec![0.0])[0];
    let near = |v: f64, target: f64| (v - target).abs() <= R2_TOL;
    let pass = near(i.0, 0.978) && near(iii[1].0, 0.967) && iii[0].0 <= R2_MAX_SIR_III && near(iv.0, 0.908);
    outcome(
        pass,
        format!(
            "I/DPSIR {:.3}±{:.3} (0.978±{R2_TOL}), III/DPSAVE {:.3}±{:.3} (0.967±{R2_TOL}), \
             III/DPSIR {:.3}±{:.3} (<= {R2_MAX_SIR_III}), IV/DPDR {:.3}±{:.3} (0.908±{R2_TOL})",
            i.0, i.1, iii[1].0, iii[1].1, iii[0].0, iii[0].1, iv.0, iv.1
        ),
    )
}

fn bivariate_w() -> Outcome {
    let (r2, se) = mean_r2(ModelId::VI, &[Method::Sir], vec![0.0, 0.0])[0];
    outcome(
        (r2 - 0.929).abs() <= R2_TOL,
        format!("VI/DPSIR at (0,0): {r2:.3}±{se:.3} (0.929±{R2_TOL})"),
    )
}

fn brute_force_oracles() -> Outcome {
    let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 0.5).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for seed in 0..10 {
        let (data, part) = discrete_dataset(seed);
        for w in [0.0, 1.0, 2.0] {
            let mom = ConditionalMoments::estimate(&data, &part, &[w], &kernel).unwrap();
            let g = group_moments(&data, &part, w);
            for (method, expected) in [(Method::Sir, sir(&g)), (Method::Save, save(&g)), (Method::Dr, dr(&g))] {
                worst = worst.max(max_abs_diff(&kernel_matrix(&mom, method), &expected));
            }
            for l in 0..part.n_slices() {
                worst_mean = worst_mean.max((mom.slice_mean_ratio(l) - &g.slice_means[l]).amax());
            }
        }
    }
    outcome(
        worst <= ORACLE_TOL && worst_mean <= ORACLE_TOL,
        format!("max |M - oracle| = {worst:.1e}, max |V - subsample mean| = {worst_mean:.1e} (<= {ORACLE_TOL:e})"),
    )
}

/// Distance correlation straight from the double sums over pairs.
fn dcor_oracle(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let centred = |z: &[f64]| {
        let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (z[i] - z[j]).abs()).collect()).collect();
        let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let all = row.iter().sum::<f64>() / n as f64;
        (0..n)
            .map(|i| (0..n).map(|j| d[i][j] - row[i] - row[j] + all).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    };
    let (a, b) = (centred(u), centred(v));
    let dot = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
        (0..n).map(|i| (0..n).map(|j| x[i][j] * y[i][j]).sum::<f64>()).sum::<f64>() / (n * n) as f64
    };
    (dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt()).sqrt()
}

fn metric_properties() -> Outcome {
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let e = DMatrix::<f64>::identity(4, 4);
    let span = e.columns(0, 2).into_owned();
    let rotated = &span * nalgebra::dmatrix![0.6, -0.8; 0.8, 0.6];
    ok &= (trace_correlation(&span, &rotated).unwrap().r2 - 1.0).abs() < 1e-12;
    ok &= trace_correlation(&span, &e.columns(2, 2).into_owned()).unwrap().r2.abs() < 1e-12;
    let diag = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
    let first = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let half = trace_correlation(&first, &diag).unwrap().r2;
    ok &= (half - 0.5).abs() < 1e-12;
    for _ in 0..200 {
        let a = DMatrix::from_fn(6, 2, |_, _| rng.random::<f64>() - 0.5);
        let b = DMatrix::from_fn(6, 2, |_, _| rng.random::<f64>() - 0.5);
        let r2 = trace_correlation(&a, &b).unwrap().r2;
        ok &= (0.0..=1.0 + 1e-12).contains(&r2);
    }
    let u = DMatrix::from_fn(50, 1, |_, _| rng.random::<f64>());
    let linear = distance_correlation(&u, &u.map(|v| 3.0 - 2.0 * v)).unwrap();
    ok &= (linear - 1.0).abs() < 1e-12;
    let xs = [0.3, -1.0, 2.5, 0.9];
    let ys = [1.0, 0.2, -0.7, 0.4];
    let got = distance_correlation(&DMatrix::from_column_slice(4, 1, &xs), &DMatrix::from_column_slice(4, 1, &ys)).unwrap();
    let oracle = dcor_oracle(&xs, &ys);
    ok &= (got - oracle).abs() < 1e-12;
    outcome(
        ok,
        format!("45-degree r2 = {half:.3}, dCor(linear) = {linear:.3}, n=4 dCor {got:.6} vs oracle {oracle:.6}"),
    )
}

fn estimator_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut asym, mut min_eig, mut simplex): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let models = [ModelId::I, ModelId::II, ModelId::III, ModelId::IV, ModelId::V];
    let mut cases = 0;
    for k in 0..60 {
        let model = models[k % models.len()];
        let data = gen_model(&ModelSpec::new(model, 200, 5).unwrap(), rng.random()).unwrap();
        let part = SlicePartition::equal_frequency(data.y().as_slice(), 5).unwrap();
        let w = rng.random::<f64>() * 1.6 - 0.8;
        let spec = KernelSpec::gaussian(0.2 + rng.random::<f64>()).unwrap();
        let Ok(mom) = ConditionalMoments::estimate(&data, &part, &[w], &spec) else {
            continue;
        };
        cases += 1;
        simplex = simplex.max((mom.probs.iter().sum::<f64>() - 1.0).abs());
        simplex = simplex.max(-mom.probs.iter().copied().fold(0.0, f64::min));
        for method in Method::ALL {
            let m = kernel_matrix(&mom, method);
            asym = asym.max(asymmetry(&m));
            min_eig = min_eig.min(min_eigenvalue(&m));
        }
    }
    let data = gen_model(&ModelSpec::new(ModelId::I, 150, 5).unwrap(), SEED).unwrap();
    let part = SlicePartition::equal_frequency(data.y().as_slice(), 5).unwrap();
    let spec = KernelSpec::gaussian(0.3).unwrap();
    let cfg = LadleConfig::new(SEED).with_replicates(50);
    let a = ladle_profile(&data, &part, &[0.0], &spec, Method::Sir, &cfg).unwrap();
    let b = ladle_profile(&data, &part, &[0.0], &spec, Method::Sir, &cfg).unwrap();
    let ladle_ok = a.f[0] == 0.0 && a.g == b.g && a.d_hat == b.d_hat;
    outcome(
        cases >= 50 && asym <= SYMMETRY_TOL && min_eig >= PSD_TOL && simplex <= SIMPLEX_TOL && ladle_ok,
        format!(
            "{cases} fits: asymmetry {asym:.1e} (<= {SYMMETRY_TOL:e}), min eigenvalue {min_eig:.1e} (>= {PSD_TOL:e}), \
             simplex error {simplex:.1e} (<= {SIMPLEX_TOL:e}); ladle f(0)=0 and seeded rerun identical: {ladle_ok}"
        ),
    )
}

fn convergence_proxy() -> Outcome {
    let sizes = [200usize, 800, 3200];
    let truth = true_basis(ModelId::I, 5, &[0.5]).unwrap();
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let h = 1.06 / 3f64.sqrt() * (n as f64).powf(-0.2);
            let spec = KernelSpec::gaussian(h).unwrap();
            let mut r2: Vec<f64> = (0..20u64)
                .map(|s| {
                    let data = gen_model(&ModelSpec::new(ModelId::I, n, 5).unwrap(), 1000 + s).unwrap();
                    let part = SlicePartition::equal_frequency(data.y().as_slice(), 5).unwrap();
                    let g = candidate_matrix(&data, &part, &[0.5], &spec, Method::Sir).unwrap();
                    let est = extract_subspace(&g, 1).unwrap();
                    trace_correlation(&est.basis(), &truth.basis).unwrap().r2
                })
                .collect();
            r2.sort_by(f64::total_cmp);
            0.5 * (r2[9] + r2[10])
        })
        .collect();
    let nondecreasing = medians.windows(2).all(|m| m[1] >= m[0]);
    let (e0, e2) = (1.0 - medians[0], 1.0 - medians[2]);
    outcome(
        nondecreasing && e2 <= 0.5 * e0,
        format!("median r2 at n={sizes:?}: {medians:.4?}; error {e2:.4} vs half of {e0:.4}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let strict = std::env::var("DPDR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 8] = [
        ("order determination at w=0, (n,p)=(150,5)", order_at_zero),
        ("Model V dynamic dimension", dynamic_dimension),
        ("mean trace correlation at w=0, (n,p)=(150,5)", subspace_accuracy),
        ("Model VI trace correlation", bivariate_w),
        ("brute-force slice-and-average oracles", brute_force_oracles),
        ("metric properties", metric_properties),
        ("estimator invariants", estimator_invariants),
        ("convergence with n under h ~ n^(-1/5)", convergence_proxy),
    ];
    println!("acceptance: master seed {SEED}, {REPS} runs, B = {BOOT}, bandwidth {RULE:?}");
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        failed += usize::from(!out.pass);
        println!(
            "{} {} {name}: {} [{:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            k + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
