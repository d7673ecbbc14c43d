use std::collections::BTreeMap;
use std::path::Path;

use dpdr_core::bandwidth::{default_grid, geometric_grid, rule_of_thumb};
use dpdr_core::{
    candidate_matrix, distance_correlation, estimate_order, extract_subspace, gen_model, load_dataset,
    read_headers, run_study, select_bandwidth, true_basis, trace_correlation, BandwidthRule, BandwidthSearch,
    ColumnSchema, Dataset, DpdrError, KernelFamily, KernelSpec, LadleConfig, LadleProfile, Method, ModelId,
    ModelSpec, Seed, SlicePartition, StudyConfig, SubspaceEstimate,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::args::{
    BandwidthArgs, BenchmarkArgs, DataArgs, EstimateArgs, EvaluateArgs, HRule, ModelArgs, OrderArgs, QueryArgs,
    SmoothArgs,
};
use crate::output::{csv_field, fmt_num, fmt_opt, fmt_w, write_file, write_json, Failure};

/// A loaded data set, plus the generating model when it was simulated.
struct Loaded {
    data: Dataset,
    model: Option<ModelId>,
}

fn simulate_data(m: &ModelArgs) -> Result<Dataset, Failure> {
    let spec = ModelSpec::new(m.model, m.n, m.p).map_err(Failure::usage)?;
    Ok(gen_model(&spec, m.seed)?)
}

fn load(args: &DataArgs) -> Result<Loaded, Failure> {
    let Some(path) = &args.data else {
        return Ok(Loaded {
            data: simulate_data(&args.model)?,
            model: Some(args.model.model),
        });
    };
    let headers = read_headers(path)?;
    let pick = |given: &[String], prefix: char| -> Vec<String> {
        if given.is_empty() {
            headers.iter().filter(|h| h.starts_with(prefix)).cloned().collect()
        } else {
            given.to_vec()
        }
    };
    let schema = ColumnSchema {
        y: args.y_col.clone(),
        x: pick(&args.x_cols, 'x'),
        w: pick(&args.w_cols, 'w'),
    };
    if schema.x.is_empty() || schema.w.is_empty() {
        return Err(Failure::Data(format!(
            "{}: cannot infer predictor and covariate columns, pass --x-cols and --w-cols",
            path.display()
        )));
    }
    Ok(Loaded {
        data: load_dataset(path, &schema)?,
        model: None,
    })
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Usage(format!("{what} must look like min:max:count, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !(hi >= lo) {
        return Err(bad());
    }
    Ok((lo, hi, count))
}

/// Cartesian product of per-coordinate axes, first coordinate outermost.
fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .iter()
            .flat_map(|p: &Vec<f64>| {
                axis.iter().map(move |&a| {
                    let mut next = p.clone();
                    next.push(a);
                    next
                })
            })
            .collect();
    }
    points
}

fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Explicit points, then the grid; without either, `{0, ±0.5, ±1}` per
/// coordinate for simulated data and the 10/30/50/70/90% quantiles of each
/// coordinate of `W` for files, rounded to four decimals.
fn queries(args: &QueryArgs, loaded: &Loaded) -> Result<Vec<Vec<f64>>, Failure> {
    let q = loaded.data.q();
    let mut points = Vec::new();
    for raw in &args.w {
        let point: Vec<f64> = raw
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Usage(format!("cannot parse query point `{raw}`")))?;
        if point.len() != q {
            return Err(Failure::Usage(format!("query `{raw}` has {} coordinates, w has {q}", point.len())));
        }
        points.push(point);
    }
    if let Some(grid) = &args.w_grid {
        let (lo, hi, count) = parse_range(grid, "--w-grid")?;
        let axis: Vec<f64> = if count == 1 {
            vec![lo]
        } else {
            (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
        };
        points.extend(cartesian(&vec![axis; q]));
    }
    if !points.is_empty() {
        return Ok(points);
    }
    if loaded.model.is_some() {
        return Ok(cartesian(&vec![vec![-1.0, -0.5, 0.0, 0.5, 1.0]; q]));
    }
    let axes: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut col: Vec<f64> = loaded.data.w().column(j).iter().copied().collect();
            col.sort_by(f64::total_cmp);
            [0.1, 0.3, 0.5, 0.7, 0.9]
                .iter()
                .map(|&pr| (quantile(&col, pr) * 1e4).round() / 1e4)
                .collect()
        })
        .collect();
    Ok(cartesian(&axes))
}

fn cv_grid(smooth: &SmoothArgs, data: &Dataset) -> Result<Vec<f64>, Failure> {
    match &smooth.h_grid {
        Some(g) => {
            let (lo, hi, count) = parse_range(g, "--h-grid")?;
            geometric_grid(lo, hi, count).map_err(Failure::usage)
        }
        None => Ok(default_grid(data)),
    }
}

/// The bandwidth for one method, and the search behind it when CV ran.
fn resolve_bandwidth(
    smooth: &SmoothArgs,
    data: &Dataset,
    partition: &SlicePartition,
    method: Method,
) -> Result<(f64, Option<BandwidthSearch>), Failure> {
    if let Some(h) = smooth.h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Failure::Usage(format!("--h must be positive, got {h}")));
        }
        return Ok((h, None));
    }
    match smooth.h_rule {
        HRule::Rot => Ok((rule_of_thumb(data), None)),
        HRule::Cv => {
            let grid = cv_grid(smooth, data)?;
            let search = select_bandwidth(data, partition, method, &grid, smooth.kernel.into())?;
            Ok((search.h_opt, Some(search)))
        }
    }
}

fn partition(data: &Dataset, slices: usize) -> Result<SlicePartition, Failure> {
    let y: Vec<f64> = data.y().iter().copied().collect();
    Ok(SlicePartition::equal_frequency(&y, slices)?)
}

#[derive(Debug, Clone, Serialize)]
struct LadleSummary {
    ks: Vec<usize>,
    f0: Vec<f64>,
    f: Vec<f64>,
    phi: Vec<f64>,
    g: Vec<f64>,
    replicates: usize,
    effective_replicates: usize,
}

impl From<&LadleProfile> for LadleSummary {
    fn from(p: &LadleProfile) -> Self {
        Self {
            ks: p.ks.clone(),
            f0: p.f0.clone(),
            f: p.f.clone(),
            phi: p.phi.clone(),
            g: p.g.clone(),
            replicates: p.replicates,
            effective_replicates: p.effective_replicates,
        }
    }
}

/// Everything reported for one (query, method) pair.
#[derive(Debug, Clone, Serialize)]
struct PointResult {
    w: Vec<f64>,
    method: Method,
    status: &'static str,
    error: Option<String>,
    bandwidth: Option<f64>,
    d: Option<usize>,
    d_source: Option<&'static str>,
    d_true: Option<usize>,
    /// Trace correlation with the true subspace at the true dimension.
    r2: Option<f64>,
    singular_values: Vec<f64>,
    /// Columns of `B̂(w)`.
    basis: Vec<Vec<f64>>,
    ladle: Option<LadleSummary>,
    #[serde(skip)]
    estimate: Option<SubspaceEstimate>,
}

impl PointResult {
    fn failed(w: &[f64], method: Method, bandwidth: Option<f64>, err: &DpdrError) -> Self {
        Self {
            w: w.to_vec(),
            method,
            status: err.kind(),
            error: Some(err.to_string()),
            bandwidth,
            d: None,
            d_source: None,
            d_true: None,
            r2: None,
            singular_values: Vec::new(),
            basis: Vec::new(),
            ladle: None,
            estimate: None,
        }
    }

    fn ok(w: &[f64], h: f64, est: SubspaceEstimate, source: &'static str, model: Option<(ModelId, usize)>) -> Self {
        let truth = model.and_then(|(m, p)| true_basis(m, p, w).ok());
        let r2 = truth.as_ref().and_then(|t| {
            (t.d_true > 0)
                .then(|| trace_correlation(&est.leading(t.d_true), &t.basis).ok().map(|s| s.r2))
                .flatten()
        });
        let basis = est.basis();
        Self {
            w: w.to_vec(),
            method: est.method,
            status: "ok",
            error: None,
            bandwidth: Some(h),
            d: Some(est.dimension),
            d_source: Some(source),
            d_true: truth.map(|t| t.d_true),
            r2,
            singular_values: est.singular_values.clone(),
            basis: basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            ladle: None,
            estimate: Some(est),
        }
    }
}

struct PointRun {
    results: Vec<PointResult>,
    searches: Vec<(Method, BandwidthSearch)>,
}

/// Runs every method at every query. Failures stay in their rows.
fn run_points(
    loaded: &Loaded,
    smooth: &SmoothArgs,
    points: &[Vec<f64>],
    d: Option<usize>,
    bootstrap: Option<usize>,
    seed: u64,
) -> Result<PointRun, Failure> {
    let data = &loaded.data;
    let model = loaded.model.map(|m| (m, data.p()));
    if let Some(d) = d {
        if d > data.p() {
            return Err(Failure::Usage(format!("--d {d} exceeds p = {}", data.p())));
        }
    }
    if bootstrap == Some(0) {
        return Err(Failure::Usage("--B must be positive".into()));
    }
    let part = partition(data, smooth.slices)?;
    let family: KernelFamily = smooth.kernel.into();
    let mut results = Vec::new();
    let mut searches = Vec::new();
    for (mi, method) in smooth.method.methods().into_iter().enumerate() {
        let (h, search) = match resolve_bandwidth(smooth, data, &part, method) {
            Ok(v) => v,
            Err(Failure::Core(e)) => {
                results.extend(points.iter().map(|w| PointResult::failed(w, method, None, &e)));
                continue;
            }
            Err(other) => return Err(other),
        };
        if let Some(s) = search {
            searches.push((method, s));
        }
        let spec = KernelSpec::new(family, h)?;
        match d {
            Some(d) => {
                for w in points {
                    let row = candidate_matrix(data, &part, w, &spec, method)
                        .and_then(|c| extract_subspace(&c, d))
                        .map_or_else(
                            |e| PointResult::failed(w, method, Some(h), &e),
                            |est| PointResult::ok(w, h, est, "given", model),
                        );
                    results.push(row);
                }
            }
            None => {
                let mut config = LadleConfig::new(Seed(seed).child(1 + mi as u64).0);
                config.replicates = bootstrap;
                let profiles = estimate_order(data, &part, points, &spec, method, &config);
                for (w, profile) in points.iter().zip(profiles) {
                    let row = match profile {
                        Ok(p) => {
                            let summary = LadleSummary::from(&p);
                            let mut row = PointResult::ok(w, h, p.estimate, "ladle", model);
                            row.ladle = Some(summary);
                            row
                        }
                        Err(e) => PointResult::failed(w, method, Some(h), &e),
                    };
                    results.push(row);
                }
            }
        }
    }
    Ok(PointRun { results, searches })
}

fn all_failed(results: &[PointResult]) -> Result<(), Failure> {
    if !results.is_empty() && results.iter().all(|r| r.status != "ok") {
        let first = results[0].error.clone().unwrap_or_default();
        return Err(Failure::Numerical(format!("every query failed; first error: {first}")));
    }
    Ok(())
}

fn ladle_csv(results: &[PointResult]) -> String {
    let mut out = String::from("w,method,k,f0,f,phi,g\n");
    for r in results {
        if let Some(l) = &r.ladle {
            for (i, k) in l.ks.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{k},{},{},{},{}\n",
                    fmt_w(&r.w),
                    r.method.name(),
                    fmt_num(l.f0[i]),
                    fmt_num(l.f[i]),
                    fmt_num(l.phi[i]),
                    fmt_num(l.g[i])
                ));
            }
        }
    }
    out
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";")
}

pub fn simulate(args: &ModelArgs, out: &Path) -> Result<(), Failure> {
    let data = simulate_data(args)?;
    write_file(&out.join("data.csv"), &data.to_csv_string())?;
    eprintln!("wrote {} rows to {}", data.n(), out.join("data.csv").display());
    Ok(())
}

pub fn estimate(args: &EstimateArgs, out: &Path) -> Result<(), Failure> {
    let loaded = load(&args.data)?;
    let points = queries(&args.query, &loaded)?;
    let run = run_points(&loaded, &args.smooth, &points, args.d, args.bootstrap, args.data.model.seed)?;

    let mut csv = String::from("w,method,status,h,d,d_source,d_true,r2,singular_values,basis,error\n");
    for r in &run.results {
        let basis = r.basis.iter().map(|c| join(c)).collect::<Vec<_>>().join("|");
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_w(&r.w),
            r.method.name(),
            r.status,
            fmt_opt(r.bandwidth),
            r.d.map_or(String::new(), |d| d.to_string()),
            r.d_source.unwrap_or(""),
            r.d_true.map_or(String::new(), |d| d.to_string()),
            fmt_opt(r.r2),
            join(&r.singular_values),
            basis,
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
        eprintln!(
            "w={} {}: {}{}",
            fmt_w(&r.w),
            r.method.name(),
            r.status,
            r.d.map_or(String::new(), |d| format!(" d={d}"))
        );
    }
    write_file(&out.join("estimate.csv"), &csv)?;
    if args.d.is_none() {
        write_file(&out.join("ladle.csv"), &ladle_csv(&run.results))?;
    }
    write_json(&out.join("estimate.json"), &run.results)?;
    write_searches(out, &run.searches)?;
    all_failed(&run.results)
}

pub fn order(args: &OrderArgs, out: &Path) -> Result<(), Failure> {
    let loaded = load(&args.data)?;
    let points = queries(&args.query, &loaded)?;
    let run = run_points(&loaded, &args.smooth, &points, None, args.bootstrap, args.data.model.seed)?;

    let mut csv = String::from("w,method,status,h,d_hat,d_true,replicates,effective_replicates,error\n");
    for r in &run.results {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_w(&r.w),
            r.method.name(),
            r.status,
            fmt_opt(r.bandwidth),
            r.d.map_or(String::new(), |d| d.to_string()),
            r.d_true.map_or(String::new(), |d| d.to_string()),
            r.ladle.as_ref().map_or(String::new(), |l| l.replicates.to_string()),
            r.ladle.as_ref().map_or(String::new(), |l| l.effective_replicates.to_string()),
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
        println!(
            "w={} {}: {}",
            fmt_w(&r.w),
            r.method.name(),
            r.d.map_or_else(|| r.status.to_string(), |d| format!("d_hat={d}"))
        );
    }
    write_file(&out.join("order.csv"), &csv)?;
    write_file(&out.join("ladle.csv"), &ladle_csv(&run.results))?;
    all_failed(&run.results)
}

#[derive(Serialize)]
struct SearchRecord<'a> {
    method: Method,
    #[serde(flatten)]
    search: &'a BandwidthSearch,
}

fn write_searches(out: &Path, searches: &[(Method, BandwidthSearch)]) -> Result<(), Failure> {
    if searches.is_empty() {
        return Ok(());
    }
    let records: Vec<SearchRecord> = searches.iter().map(|(method, search)| SearchRecord { method: *method, search }).collect();
    write_json(&out.join("bandwidth.json"), &records)
}

pub fn bandwidth(args: &BandwidthArgs, out: &Path) -> Result<(), Failure> {
    let loaded = load(&args.data)?;
    let data = &loaded.data;
    let part = partition(data, args.smooth.slices)?;
    let grid = cv_grid(&args.smooth, data)?;
    let mut cv = String::from("method,slice,h,cv\n");
    let mut picks = String::from("method,h,loglik,used,dropped,selected\n");
    let mut searches = Vec::new();
    println!("rule of thumb h = {}", fmt_num(rule_of_thumb(data)));
    for method in args.smooth.method.methods() {
        let search = select_bandwidth(data, &part, method, &grid, args.smooth.kernel.into())?;
        for (l, row) in search.per_slice_cv.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                cv.push_str(&format!("{},{},{},{}\n", method.name(), l + 1, fmt_num(search.grid[k]), fmt_opt(*v)));
            }
        }
        for (h, ll) in search.candidates.iter().zip(&search.loglik) {
            picks.push_str(&format!(
                "{},{},{},{},{},{}\n",
                method.name(),
                fmt_num(*h),
                fmt_num(ll.value),
                ll.used,
                ll.dropped,
                u8::from(*h == search.h_opt)
            ));
        }
        println!("{}: h_opt = {}", method.name(), fmt_num(search.h_opt));
        searches.push((method, search));
    }
    write_file(&out.join("cv.csv"), &cv)?;
    write_file(&out.join("selection.csv"), &picks)?;
    write_searches(out, &searches)
}

#[derive(Serialize)]
struct BenchmarkJson<'a> {
    partial: bool,
    config: &'a StudyConfig,
    cells: &'a [dpdr_core::study::CellSummary],
}

pub fn benchmark(args: &BenchmarkArgs, out: &Path) -> Result<(), Failure> {
    let m = &args.model;
    ModelSpec::new(m.model, m.n, m.p).map_err(Failure::usage)?;
    let mut config = StudyConfig::new(m.model, m.n, m.p, args.reps, m.seed);
    config.slices = args.smooth.slices;
    config.methods = args.smooth.method.methods();
    config.family = args.smooth.kernel.into();
    config.bootstrap = (args.bootstrap > 0).then_some(args.bootstrap);
    config.bandwidth = match (args.smooth.h, args.smooth.h_rule) {
        (Some(h), _) => BandwidthRule::Fixed(h),
        (None, HRule::Rot) => BandwidthRule::RuleOfThumb(1.0),
        (None, HRule::Cv) => BandwidthRule::Cv,
    };
    if args.smooth.h_grid.is_some() {
        eprintln!("note: benchmark CV uses the default grid; --h-grid is ignored");
    }
    // Query parsing only needs q; a tiny draw supplies it.
    let probe = Loaded {
        data: gen_model(&ModelSpec::new(m.model, m.p + 2, m.p).map_err(Failure::usage)?, 0)?,
        model: Some(m.model),
    };
    config.points = queries(&args.query, &probe)?;
    let report = run_study(&config).map_err(|e| match e {
        DpdrError::InvalidArgument(_) => Failure::usage(e),
        other => Failure::Core(other),
    })?;
    write_file(&out.join("benchmark.csv"), &report.to_csv())?;
    let order_md = report.order_table_markdown();
    let r2_md = report.r2_table_markdown();
    if config.bootstrap.is_some() {
        write_file(&out.join("order.md"), &order_md)?;
        println!("Correct order determinations\n\n{order_md}");
    }
    write_file(&out.join("r2.md"), &r2_md)?;
    println!("Mean trace correlation\n\n{r2_md}");
    write_json(
        &out.join("benchmark.json"),
        &BenchmarkJson {
            partial: report.partial,
            config: &report.config,
            cells: &report.cells,
        },
    )?;
    eprintln!("{} runs in {:.1}s", config.reps, report.elapsed_secs);
    if report.partial {
        eprintln!("warning: some replicates failed; see the failures column");
    }
    Ok(())
}

/// A `p × d` matrix from a CSV without header (a header row is skipped if
/// it does not parse).
fn read_basis(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| DpdrError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Failure::Data(format!("{}: bad basis row {}", path.display(), i + 1))),
        }
    }
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Failure::Data(format!("{}: basis rows must be nonempty and equal length", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn y_matrix(data: &Dataset) -> DMatrix<f64> {
    DMatrix::from_column_slice(data.n(), 1, data.y().as_slice())
}

#[derive(Serialize)]
struct EvalRow {
    method: String,
    w: String,
    d: Option<usize>,
    dcor: Option<f64>,
    used: usize,
    status: String,
    error: Option<String>,
}

/// `dCor(Y, B̂(W_i)B̂(W_i)ᵀ x_i)` with `B̂` re-estimated at every
/// observation's own covariate. Projecting rather than taking coordinates
/// keeps the statistic free of the basis' arbitrary rotation.
fn dynamic_dcor(
    data: &Dataset,
    part: &SlicePartition,
    spec: &KernelSpec,
    method: Method,
    d: usize,
) -> Result<(f64, usize), DpdrError> {
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for i in 0..data.n() {
        let w = data.w_slice(i);
        let Ok(est) = candidate_matrix(data, part, w, spec, method).and_then(|c| extract_subspace(&c, d)) else {
            continue;
        };
        let b = est.basis();
        let z = &b * (b.transpose() * data.x_row(i).transpose());
        ys.push(data.y()[i]);
        zs.extend(z.iter().copied());
    }
    let used = ys.len();
    if used < 2 {
        return Err(DpdrError::Numerical("fewer than two observations could be projected".into()));
    }
    let y = DMatrix::from_column_slice(used, 1, &ys);
    let z = DMatrix::from_row_slice(used, data.p(), &zs);
    Ok((distance_correlation(&y, &z)?, used))
}

fn modal_dimension(results: &[&PointResult]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for d in results.iter().filter_map(|r| r.d) {
        *counts.entry(d).or_default() += 1;
    }
    // BTreeMap iterates in increasing d, so ties keep the smaller dimension.
    counts.into_iter().fold(None, |best: Option<(usize, usize)>, (d, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((d, c)),
    })
    .map(|(d, _)| d)
}

pub fn evaluate(args: &EvaluateArgs, out: &Path) -> Result<(), Failure> {
    let loaded = load(&args.data)?;
    let data = &loaded.data;
    let y = y_matrix(data);
    let mut rows = Vec::new();

    if let Some(path) = &args.basis {
        let b = read_basis(path)?;
        if b.nrows() != data.p() {
            return Err(Failure::Data(format!(
                "basis has {} rows but the data have {} predictors",
                b.nrows(),
                data.p()
            )));
        }
        let dcor = distance_correlation(&y, &(data.x() * &b))?;
        rows.push(EvalRow {
            method: "fixed".into(),
            w: "all".into(),
            d: Some(b.ncols()),
            dcor: Some(dcor),
            used: data.n(),
            status: "ok".into(),
            error: None,
        });
    } else {
        let points = queries(&args.query, &loaded)?;
        let run = run_points(&loaded, &args.smooth, &points, args.d, args.bootstrap, args.data.model.seed)?;
        let part = partition(data, args.smooth.slices)?;
        for method in args.smooth.method.methods() {
            let mine: Vec<&PointResult> = run.results.iter().filter(|r| r.method == method).collect();
            let mut scores = Vec::new();
            for r in &mine {
                let row = match (&r.estimate, r.d) {
                    (Some(est), Some(d)) => {
                        let dcor = if d == 0 { Ok(0.0) } else { distance_correlation(&y, &(data.x() * est.basis())) };
                        match dcor {
                            Ok(v) => {
                                scores.push(v);
                                EvalRow {
                                    method: method.name().into(),
                                    w: fmt_w(&r.w),
                                    d: Some(d),
                                    dcor: Some(v),
                                    used: data.n(),
                                    status: "ok".into(),
                                    error: None,
                                }
                            }
                            Err(e) => eval_failure(method, fmt_w(&r.w), &e),
                        }
                    }
                    _ => EvalRow {
                        method: method.name().into(),
                        w: fmt_w(&r.w),
                        d: None,
                        dcor: None,
                        used: 0,
                        status: r.status.into(),
                        error: r.error.clone(),
                    },
                };
                rows.push(row);
            }
            if !scores.is_empty() {
                rows.push(EvalRow {
                    method: method.name().into(),
                    w: "mean".into(),
                    d: None,
                    dcor: Some(scores.iter().sum::<f64>() / scores.len() as f64),
                    used: scores.len(),
                    status: "ok".into(),
                    error: None,
                });
            }
            let h = mine.iter().find_map(|r| r.bandwidth);
            match (args.d.or_else(|| modal_dimension(&mine)), h) {
                (Some(d), Some(h)) if d > 0 => {
                    let spec = KernelSpec::new(args.smooth.kernel.into(), h)?;
                    rows.push(match dynamic_dcor(data, &part, &spec, method, d) {
                        Ok((v, used)) => EvalRow {
                            method: method.name().into(),
                            w: "dynamic".into(),
                            d: Some(d),
                            dcor: Some(v),
                            used,
                            status: "ok".into(),
                            error: None,
                        },
                        Err(e) => eval_failure(method, "dynamic".into(), &e),
                    });
                }
                (Some(0), _) => rows.push(EvalRow {
                    method: method.name().into(),
                    w: "dynamic".into(),
                    d: Some(0),
                    dcor: Some(0.0),
                    used: data.n(),
                    status: "ok".into(),
                    error: None,
                }),
                _ => {}
            }
        }
        write_searches(out, &run.searches)?;
    }

    let mut csv = String::from("method,w,d,dcor,used,status,error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.w,
            r.d.map_or(String::new(), |d| d.to_string()),
            fmt_opt(r.dcor),
            r.used,
            r.status,
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
    }
    write_file(&out.join("evaluate.csv"), &csv)?;
    write_json(&out.join("evaluate.json"), &rows)?;
    let md = evaluate_markdown(&rows);
    write_file(&out.join("evaluate.md"), &md)?;
    println!("{md}");
    if rows.iter().all(|r| r.dcor.is_none()) {
        return Err(Failure::Numerical("no distance correlation could be computed".into()));
    }
    Ok(())
}

fn eval_failure(method: Method, w: String, e: &DpdrError) -> EvalRow {
    EvalRow {
        method: method.name().into(),
        w,
        d: None,
        dcor: None,
        used: 0,
        status: e.kind().into(),
        error: Some(e.to_string()),
    }
}

/// Points down, methods across.
fn evaluate_markdown(rows: &[EvalRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut points: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !points.contains(&r.w.as_str()) {
            points.push(&r.w);
        }
    }
    let mut out = String::from("| w |");
    for m in &methods {
        out.push_str(&format!(" {m} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(methods.len()));
    out.push('\n');
    for w in &points {
        out.push_str(&format!("| {w} |"));
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.method == *m && r.w == *w)
                .and_then(|r| r.dcor)
                .map_or("-".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}
