//! Subcommand implementations. Each returns the list of files it wrote.

use std::path::PathBuf;

use exterior_gs::curve::{
    mass_scaling_exponent, refine_points_except, rescale_threshold, stability_classify, threshold_with,
    trace_curve_with, StabilityLabel, TraceError,
};
use exterior_gs::fd_oracle::{
    compare, fd_solve_with, richardson_study, soliton_ansatz, FdGrid, NewtonConfig, DEFAULT_NODES,
};
use exterior_gs::pohozaev::{
    boundary_rhs, concentration_ratios, diagnostics, reversed_inequality_slack, supercritical_inequality_slack,
    REPORT_EPS,
};
use exterior_gs::problem::{critical_exponents, validate, REGIME_TOLERANCE};
use exterior_gs::profile::{mass, mass_expansion};
use exterior_gs::{CurveConfig, CurvePoint, DiagnosticsReport, MassCurve, ProblemParams, RadialSolution};
use serde::Serialize;

use crate::cache::{CacheKey, PointCache};
use crate::config::{pick, require, FileConfig, Tolerances};
use crate::error::CliError;
use crate::output::{curve_csv, curve_svg, ensure_dir, fmt_name, fmt_num, table_csv, write_json, write_text};
use crate::{Cli, Command, GridArgs, ProblemArgs};

/// Settings shared by every subcommand after merging the config file.
struct Run {
    file: FileConfig,
    out: PathBuf,
    jobs: usize,
    cache: bool,
    tolerances: Tolerances,
}

impl Run {
    fn curve_config(&self) -> CurveConfig {
        self.tolerances.curve_config()
    }

    /// `(N, p, R)` with `N` and `p` validated before anything else is read.
    fn problem(&self, args: &ProblemArgs) -> Result<(usize, f64, f64), CliError> {
        let n = require(pick(args.n, &self.file.n), "N")?;
        let p = snap_exponent(n, require(pick(args.p, &self.file.p), "p")?);
        let radius = pick(args.radius, &self.file.radius).unwrap_or(1.0);
        validate(n, p, 1.0, radius)?;
        Ok((n, p, radius))
    }

    fn params(&self, args: &ProblemArgs, lambda: Option<f64>) -> Result<ProblemParams, CliError> {
        let (n, p, radius) = self.problem(args)?;
        let lambda = require(pick(lambda, &self.file.lambda), "lambda")?;
        Ok(ProblemParams::new(n, p, lambda, radius)?)
    }

    fn grid(&self, args: &GridArgs, radius: f64) -> (f64, f64, usize) {
        let cfg = self.curve_config();
        let r2 = radius * radius;
        (
            pick(args.lambda_min, &self.file.lambda_min).unwrap_or(cfg.window.0 / r2),
            pick(args.lambda_max, &self.file.lambda_max).unwrap_or(cfg.window.1 / r2),
            pick(args.points, &self.file.points).unwrap_or(cfg.window_points),
        )
    }

    fn open_cache(&self, stage: &str, n: usize, p: f64, radius: f64) -> Result<Option<PointCache>, CliError> {
        if !self.cache {
            return Ok(None);
        }
        let key = CacheKey {
            stage: stage.to_string(),
            n,
            p,
            radius,
            tolerances: self.tolerances,
        };
        PointCache::open(&self.out, key).map(Some)
    }
}

/// Relative distance within which a typed exponent is read as a regime
/// boundary. Ten significant digits of `10/3` land inside it.
const SNAP_TOLERANCE: f64 = 1e-9;

/// Replaces a decimal approximation of `4`, `6` or `2 + 4/N` by the exact
/// value, so `3.3333333333` lands in the same regime as `10/3`.
fn snap_exponent(n: usize, p: f64) -> f64 {
    let Ok((p_c, _)) = critical_exponents::<f64>(n) else {
        return p;
    };
    for b in [4.0, 6.0, p_c] {
        let rel = ((p - b) / b).abs();
        if rel > REGIME_TOLERANCE && rel < SNAP_TOLERANCE {
            eprintln!("exterior-gs: note: reading p = {p} as {b}");
            return b;
        }
    }
    p
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig {
            schema_version: crate::config::SCHEMA_VERSION,
            ..FileConfig::default()
        },
    };
    let jobs = pick(cli.jobs, &file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let run = Run {
        out: pick(cli.out.clone(), &file.out).unwrap_or_else(|| PathBuf::from(".")),
        jobs,
        cache: cli.cache || file.cache.unwrap_or(false),
        tolerances: file.tolerances.unwrap_or_default(),
        file,
    };
    match &cli.command {
        Command::Solve { problem, lambda } => cmd_solve(&run, problem, *lambda),
        Command::Curve { problem, grid, svg } => cmd_curve(&run, problem, grid, *svg),
        Command::Threshold { problem } => cmd_threshold(&run, problem),
        Command::Stability { problem, grid } => cmd_stability(&run, problem, grid),
        Command::Scaling { problem, radii } => cmd_scaling(&run, problem, radii.clone()),
        Command::Check { problem, lambda } => cmd_check(&run, problem, *lambda),
        Command::CompareOracle { problem, lambda, nodes } => cmd_compare_oracle(&run, problem, *lambda, *nodes),
    }
}

fn stem(kind: &str, params: &ProblemParams) -> String {
    format!(
        "{kind}_{}_{}_{}_{}",
        params.n,
        fmt_name(params.p),
        fmt_name(params.lambda),
        fmt_name(params.inner_radius)
    )
}

fn curve_stem(kind: &str, n: usize, p: f64, radius: f64) -> String {
    format!("{kind}_{n}_{}_{}", fmt_name(p), fmt_name(radius))
}

fn solve(run: &Run, params: &ProblemParams) -> Result<RadialSolution, CliError> {
    let (_, sol) = exterior_gs::curve::solve_point(params, None, &run.curve_config())?;
    Ok(sol)
}


#[derive(Serialize)]
struct SolutionFile<'a> {
    n: usize,
    p: f64,
    lambda: f64,
    radius: f64,
    regime: exterior_gs::Regime,
    slope: f64,
    r_bar: f64,
    u_max: f64,
    mass: f64,
    mass_tail_fraction: f64,
    action: f64,
    diagnostics: DiagnosticsReport,
    solution: &'a RadialSolution,
}

fn cmd_solve(run: &Run, problem: &ProblemArgs, lambda: Option<f64>) -> Result<Vec<PathBuf>, CliError> {
    let params = run.params(problem, lambda)?;
    let sol = solve(run, &params)?;
    let m = mass(&sol)?;
    let diag = diagnostics(&sol)?;
    let file = SolutionFile {
        n: params.n,
        p: params.p,
        lambda: params.lambda,
        radius: params.inner_radius,
        regime: params.regime(),
        slope: sol.slope,
        r_bar: sol.r_bar,
        u_max: sol.u_max,
        mass: m.value,
        mass_tail_fraction: m.tail_fraction,
        action: diag.action,
        diagnostics: diag,
        solution: &sol,
    };
    ensure_dir(&run.out)?;
    let path = run.out.join(format!("{}.json", stem("solution", &params)));
    Ok(vec![write_json(&path, &file)?])
}

/// Continuation followed by the refinement pass, consulting the cache.
fn refined_curve(
    run: &Run,
    cache: &mut Option<PointCache>,
    n: usize,
    p: f64,
    radius: f64,
    (lo, hi, points): (f64, f64, usize),
) -> Result<MassCurve, TraceError<f64>> {
    let config = run.curve_config();
    let curve = {
        let mut reuse = |lambda: f64| cache.as_mut().and_then(|c| c.get(lambda));
        trace_curve_with(n, p, radius, lo, hi, points, &config, &mut reuse)?
    };
    let keep: Vec<bool> = curve
        .points
        .iter()
        .map(|pt| cache.as_ref().is_some_and(|c| c.contains(pt.lambda)))
        .collect();
    refine_points_except(&curve, &config, run.jobs, &keep).map_err(|e| TraceError {
        lambda: lo,
        message: e.to_string(),
        partial: curve.clone(),
    })
}

#[derive(Serialize)]
struct FailureReport {
    failed_lambda: f64,
    message: String,
    completed_points: usize,
    requested_points: usize,
    partial_csv: PathBuf,
}

fn write_partial(run: &Run, base: &str, err: &TraceError<f64>) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&run.out)?;
    let labels = vec![StabilityLabel::Indeterminate; err.partial.points.len()];
    let csv_path = run.out.join(format!("{base}.partial.csv"));
    write_text(&csv_path, &curve_csv(&err.partial, &labels)?)?;
    let report = FailureReport {
        failed_lambda: err.lambda,
        message: err.message.clone(),
        completed_points: err.partial.points.len(),
        requested_points: err.partial.grid_spec.n_points,
        partial_csv: csv_path.clone(),
    };
    let json_path = run.out.join(format!("{base}.failure.json"));
    write_json(&json_path, &report)?;
    Ok(vec![csv_path, json_path])
}

fn trace_or_annotate(
    run: &Run,
    base: &str,
    n: usize,
    p: f64,
    radius: f64,
    grid: (f64, f64, usize),
) -> Result<MassCurve, CliError> {
    let mut cache = run.open_cache("refined", n, p, radius)?;
    match refined_curve(run, &mut cache, n, p, radius, grid) {
        Ok(c) => {
            if let Some(store) = cache.as_mut() {
                store.store(&c.points);
                store.save()?;
            }
            Ok(c)
        }
        Err(e) => {
            let written = write_partial(run, base, &e)?;
            let category = if e.partial.points.is_empty() && e.message.contains("invalid argument") {
                CliError::Validation
            } else {
                CliError::Solver
            };
            Err(category(format!(
                "SolveFailed at lambda = {}: {} (partial results in {})",
                e.lambda,
                e.message,
                written[0].display()
            )))
        }
    }
}

fn cmd_curve(run: &Run, problem: &ProblemArgs, grid: &GridArgs, svg: bool) -> Result<Vec<PathBuf>, CliError> {
    let (n, p, radius) = run.problem(problem)?;
    let grid = run.grid(grid, radius);
    let base = curve_stem("curve", n, p, radius);
    let curve = trace_or_annotate(run, &base, n, p, radius, grid)?;
    let labels = stability_classify(&curve, run.tolerances.stability_tol);
    ensure_dir(&run.out)?;
    let mut written = vec![write_text(
        &run.out.join(format!("{base}.csv")),
        &curve_csv(&curve, &labels)?,
    )?];
    if svg || run.file.svg.unwrap_or(false) {
        let mark = curve.argmin().map(|i| (curve.points[i].lambda, curve.points[i].d));
        written.push(write_text(
            &run.out.join(format!("{base}.svg")),
            &curve_svg(&curve, mark),
        )?);
    }
    Ok(written)
}

fn threshold_report(
    run: &Run,
    n: usize,
    p: f64,
    radius: f64,
) -> Result<(exterior_gs::ThresholdReport, MassCurve), CliError> {
    let config = run.curve_config();
    let mut cache = run.open_cache("traced", n, p, radius)?;
    let result = {
        let mut reuse = |lambda: f64| cache.as_mut().and_then(|c| c.get(lambda));
        threshold_with(n, p, radius, &config, &mut reuse)
    };
    let (report, curve) = result?;
    if let Some(c) = cache.as_mut() {
        let grid: Vec<CurvePoint> = curve
            .grid_spec
            .lambdas()
            .iter()
            .filter_map(|l| curve.points.iter().find(|pt| pt.lambda == *l).cloned())
            .collect();
        c.store(&grid);
        c.save()?;
    }
    Ok((report, curve))
}

fn cmd_threshold(run: &Run, problem: &ProblemArgs) -> Result<Vec<PathBuf>, CliError> {
    let (n, p, radius) = run.problem(problem)?;
    let (report, _) = threshold_report(run, n, p, radius)?;
    ensure_dir(&run.out)?;
    let path = run.out.join(format!("{}.json", curve_stem("threshold", n, p, radius)));
    Ok(vec![write_json(&path, &report)?])
}

#[derive(Serialize)]
struct StabilityEntry {
    lambda: f64,
    d: f64,
    d_prime: f64,
    label: StabilityLabel,
}

#[derive(Serialize)]
struct StabilityFile {
    n: usize,
    p: f64,
    radius: f64,
    tolerance: f64,
    label_changes: usize,
    minimum_lambda: Option<f64>,
    points: Vec<StabilityEntry>,
}

fn cmd_stability(run: &Run, problem: &ProblemArgs, grid: &GridArgs) -> Result<Vec<PathBuf>, CliError> {
    let (n, p, radius) = run.problem(problem)?;
    let grid = run.grid(grid, radius);
    let base = curve_stem("stability", n, p, radius);
    let curve = trace_or_annotate(run, &base, n, p, radius, grid)?;
    let tol = run.tolerances.stability_tol;
    let labels = stability_classify(&curve, tol);
    let derivs = exterior_gs::curve::mass_derivative(&curve.lambdas(), &curve.masses());
    let definite: Vec<StabilityLabel> = labels
        .iter()
        .copied()
        .filter(|l| *l != StabilityLabel::Indeterminate)
        .collect();
    let label_changes = definite.windows(2).filter(|w| w[0] != w[1]).count();
    let file = StabilityFile {
        n,
        p,
        radius,
        tolerance: tol,
        label_changes,
        minimum_lambda: curve.argmin().map(|i| curve.points[i].lambda),
        points: curve
            .points
            .iter()
            .zip(&labels)
            .zip(&derivs)
            .map(|((pt, &label), &d_prime)| StabilityEntry {
                lambda: pt.lambda,
                d: pt.d,
                d_prime,
                label,
            })
            .collect(),
    };
    ensure_dir(&run.out)?;
    Ok(vec![write_json(&run.out.join(format!("{base}.json")), &file)?])
}

#[derive(Serialize)]
struct ScalingRow {
    radius: f64,
    eta: f64,
    kind: exterior_gs::curve::ThresholdKind,
    lambda_hat: Option<f64>,
    /// `η_R / R^{N − 4/(p−2)}`: constant when the scaling law holds.
    eta_normalized: f64,
    /// `η_R` divided by the value predicted from the first radius.
    ratio_to_prediction: f64,
}

#[derive(Serialize)]
struct ScalingFile {
    n: usize,
    p: f64,
    exponent: f64,
    max_relative_spread: f64,
    rows: Vec<ScalingRow>,
}

fn cmd_scaling(run: &Run, problem: &ProblemArgs, radii: Option<Vec<f64>>) -> Result<Vec<PathBuf>, CliError> {
    let (n, p, _) = run.problem(problem)?;
    let radii = pick(radii, &run.file.radii).unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    if radii.is_empty() {
        return Err(CliError::Validation("--radii must list at least one radius".into()));
    }
    for &r in &radii {
        validate(n, p, 1.0, r)?;
    }
    let chunk = radii.len().div_ceil(run.jobs.clamp(1, radii.len()));
    let reports: Vec<Result<exterior_gs::ThresholdReport, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = radii
            .chunks(chunk)
            .map(|batch| {
                scope.spawn(move || {
                    batch
                        .iter()
                        .map(|&r| threshold_report(run, n, p, r).map(|x| x.0))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("scaling worker panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let exponent = mass_scaling_exponent(n, p);
    let base_norm = reports[0].eta / radii[0].powf(exponent);
    let rows: Vec<ScalingRow> = radii
        .iter()
        .zip(&reports)
        .map(|(&r, rep)| {
            let predicted = rescale_threshold(base_norm, n, p, r).unwrap_or(f64::NAN);
            ScalingRow {
                radius: r,
                eta: rep.eta,
                kind: rep.kind,
                lambda_hat: rep.lambda_hat,
                eta_normalized: rep.eta / r.powf(exponent),
                ratio_to_prediction: if predicted > 0.0 { rep.eta / predicted } else { f64::NAN },
            }
        })
        .collect();
    let etas: Vec<f64> = rows.iter().map(|r| r.eta_normalized).collect();
    let hi = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = etas.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.radius),
                fmt_num(r.eta),
                fmt_num(r.eta_normalized),
                fmt_num(r.ratio_to_prediction),
                serde_json::to_value(r.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        })
        .collect();
    let file = ScalingFile {
        n,
        p,
        exponent,
        max_relative_spread: spread,
        rows,
    };
    ensure_dir(&run.out)?;
    let base = format!("scaling_{n}_{}", fmt_name(p));
    let csv = table_csv(
        &["radius", "eta", "eta_normalized", "ratio_to_prediction", "kind"],
        &table,
    )?;
    Ok(vec![
        write_text(&run.out.join(format!("{base}.csv")), &csv)?,
        write_json(&run.out.join(format!("{base}.json")), &file)?,
    ])
}

#[derive(Serialize)]
struct CheckFile {
    n: usize,
    p: f64,
    lambda: f64,
    radius: f64,
    diagnostics: DiagnosticsReport,
    boundary_rhs: (f64, f64),
    inequality_eps: f64,
    supercritical_slack: f64,
    reversed_slack: f64,
    concentration_mass_ratio: f64,
    concentration_gradient_ratio: f64,
    mass_expansion_terms: Vec<f64>,
    mass_expansion_deviation: f64,
    invariants_ok: bool,
    invariant_violation: Option<String>,
}

fn cmd_check(run: &Run, problem: &ProblemArgs, lambda: Option<f64>) -> Result<Vec<PathBuf>, CliError> {
    let params = run.params(problem, lambda)?;
    let sol = solve(run, &params)?;
    let diag = diagnostics(&sol)?;
    let (c_mass, c_grad) = concentration_ratios(&sol)?;
    let expansion = mass_expansion(&sol)?;
    let invariants = sol.check_invariants();
    let file = CheckFile {
        n: params.n,
        p: params.p,
        lambda: params.lambda,
        radius: params.inner_radius,
        diagnostics: diag,
        boundary_rhs: boundary_rhs(&sol)?,
        inequality_eps: REPORT_EPS,
        supercritical_slack: supercritical_inequality_slack(&sol, REPORT_EPS)?,
        reversed_slack: reversed_inequality_slack(&sol)?,
        concentration_mass_ratio: c_mass,
        concentration_gradient_ratio: c_grad,
        mass_expansion_terms: expansion.terms,
        mass_expansion_deviation: expansion.deviation,
        invariants_ok: invariants.is_ok(),
        invariant_violation: invariants.err(),
    };
    ensure_dir(&run.out)?;
    Ok(vec![write_json(
        &run.out.join(format!("{}.json", stem("check", &params))),
        &file,
    )?])
}

#[derive(Serialize)]
struct OracleFile {
    n: usize,
    p: f64,
    lambda: f64,
    radius: f64,
    fd_nodes: usize,
    shooting_mass: f64,
    fd_mass: f64,
    comparison: exterior_gs::Comparison,
    fd_nehari_res: f64,
    fd_pohozaev_res: f64,
    richardson: exterior_gs::fd_oracle::RichardsonStudy<f64>,
}

fn cmd_compare_oracle(
    run: &Run,
    problem: &ProblemArgs,
    lambda: Option<f64>,
    nodes: Option<usize>,
) -> Result<Vec<PathBuf>, CliError> {
    let params = run.params(problem, lambda)?;
    let nodes = pick(nodes, &run.file.fd_nodes).unwrap_or(DEFAULT_NODES);
    let grid = FdGrid::for_params(&params, nodes)?;
    let shot = solve(run, &params)?;
    let guess = soliton_ansatz(&params, &grid)?;
    let fd = fd_solve_with(&params, &grid, &guess, &NewtonConfig::default())?;
    let fd_diag = diagnostics(&fd)?;
    let file = OracleFile {
        n: params.n,
        p: params.p,
        lambda: params.lambda,
        radius: params.inner_radius,
        fd_nodes: grid.n(),
        shooting_mass: mass(&shot)?.value,
        fd_mass: mass(&fd)?.value,
        comparison: compare(&shot, &fd)?,
        fd_nehari_res: fd_diag.nehari_res,
        fd_pohozaev_res: fd_diag.pohozaev_full_res,
        richardson: richardson_study(&params, 201)?,
    };
    ensure_dir(&run.out)?;
    Ok(vec![write_json(
        &run.out.join(format!("{}.json", stem("compare", &params))),
        &file,
    )?])
}
