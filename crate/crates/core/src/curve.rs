//! The mass curve `λ ↦ d(λ)`: continuation, thresholds, level-set counts,
//! stability labels and the radius scaling law.

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::pohozaev::{diagnostics, DiagnosticsReport};
use crate::problem::{ProblemParams, Regime};
use crate::profile::mass;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::shooter::{solve_ground_state, ShooterConfig};
use crate::solution::{GridPoint, RadialSolution, TailData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig<T> {
    pub shooter: ShooterConfig<T>,
    /// A point is accepted only if its Nehari residual is below this.
    pub nehari_gate: T,
    /// ... and its full Pohozaev residual below this.
    pub pohozaev_gate: T,
    /// Relative derivative threshold for a stability label.
    pub stability_tol: T,
    /// Log-log slope magnitude above which an endpoint trend is reported.
    pub trend_threshold: T,
    pub trend_points: usize,
    /// Golden-section stopping width, relative in `λ`.
    pub refine_rel_width: T,
    /// Threshold search window in units of `λR²`.
    pub window: (T, T),
    pub window_points: usize,
}

impl<T: Real> Default for CurveConfig<T> {
    fn default() -> Self {
        Self {
            shooter: ShooterConfig::default(),
            nehari_gate: lit(1e-6),
            pohozaev_gate: lit(1e-4),
            stability_tol: lit(1e-3),
            trend_threshold: lit(0.1),
            trend_points: 5,
            refine_rel_width: lit(1e-4),
            window: (lit(1e-3), lit(1e3)),
            window_points: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub lambda: T,
    pub d: T,
    pub slope_hint: T,
    pub r_bar: T,
    pub action: T,
    pub diagnostics: DiagnosticsReport<T>,
}

impl<T: Real> CurvePoint<T> {
    pub fn from_solution(sol: &RadialSolution<T>) -> Result<Self> {
        let d = mass(sol)?.value;
        let diagnostics = diagnostics(sol)?;
        Ok(Self {
            lambda: sol.params.lambda,
            d,
            slope_hint: sol.slope,
            r_bar: sol.r_bar,
            action: diagnostics.action,
            diagnostics,
        })
    }

    fn passes(&self, config: &CurveConfig<T>) -> bool {
        self.d > T::zero()
            && self.diagnostics.nehari_res < config.nehari_gate
            && self.diagnostics.pohozaev_full_res < config.pohozaev_gate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub lambda_lo: T,
    pub lambda_hi: T,
    pub n_points: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn lambdas(&self) -> Vec<T> {
        let ratio = (self.lambda_hi / self.lambda_lo).ln();
        let last = self.n_points - 1;
        (0..self.n_points)
            .map(|i| match i {
                0 => self.lambda_lo,
                i if i == last => self.lambda_hi,
                i => self.lambda_lo * (ratio * from_usize::<T>(i) / from_usize::<T>(last)).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCurve<T> {
    pub points: Vec<CurvePoint<T>>,
    pub n: usize,
    pub p: T,
    pub inner_radius: T,
    pub grid_spec: GridSpec<T>,
}

impl<T: Real> MassCurve<T> {
    pub fn lambdas(&self) -> Vec<T> {
        self.points.iter().map(|pt| pt.lambda).collect()
    }

    pub fn masses(&self) -> Vec<T> {
        self.points.iter().map(|pt| pt.d).collect()
    }

    pub fn params_at(&self, lambda: T) -> Result<ProblemParams<T>> {
        ProblemParams::new(self.n, self.p, lambda, self.inner_radius)
    }

    /// Inserts a point keeping `λ` strictly increasing; an equal `λ` is
    /// replaced.
    pub fn insert(&mut self, point: CurvePoint<T>) {
        match self.points.iter().position(|q| q.lambda >= point.lambda) {
            Some(i) if self.points[i].lambda == point.lambda => self.points[i] = point,
            Some(i) => self.points.insert(i, point),
            None => self.points.push(point),
        }
    }

    /// Index of the smallest `d`.
    pub fn argmin(&self) -> Option<usize> {
        (0..self.points.len()).min_by(|&a, &b| {
            self.points[a]
                .d
                .partial_cmp(&self.points[b].d)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

/// Continuation failure; carries everything computed before the failure.
#[derive(Debug, Clone, PartialEq, ThisError)]
#[error("solve failed at lambda = {lambda}: {message}")]
pub struct TraceError<T: std::fmt::Debug + std::fmt::Display> {
    pub lambda: T,
    pub message: String,
    pub partial: MassCurve<T>,
}

impl<T: Real> From<TraceError<T>> for Error {
    fn from(e: TraceError<T>) -> Self {
        Error::SolveFailed {
            lambda: to_f64(e.lambda),
            message: e.message,
        }
    }
}

/// Warm-start slope at `λ_next` from a solved neighbour, following the
/// natural scaling `s ∝ λ^{1/(p−2) + 1/2}`.
pub fn warm_start_hint<T: Real>(prev: &CurvePoint<T>, lambda: T, p: T) -> T {
    let expo = T::one() / (p - lit(2.0)) + lit(0.5);
    prev.slope_hint * (lambda / prev.lambda).powf(expo)
}

/// Solves one point and checks the gates, retrying once at a tighter
/// integrator tolerance.
pub fn solve_point<T: Real>(
    params: &ProblemParams<T>,
    hint: Option<T>,
    config: &CurveConfig<T>,
) -> Result<(CurvePoint<T>, RadialSolution<T>)> {
    let attempt = |shooter: &ShooterConfig<T>| -> Result<(CurvePoint<T>, RadialSolution<T>)> {
        let sol = solve_ground_state(params, shooter, hint)?;
        let point = CurvePoint::from_solution(&sol)?;
        Ok((point, sol))
    };
    let first = attempt(&config.shooter);
    if let Ok((pt, _)) = &first {
        if pt.passes(config) {
            return first;
        }
    }
    let tight = ShooterConfig {
        integrator: config.shooter.integrator.tightened(lit(10.0)),
        ..config.shooter
    };
    let second = attempt(&tight);
    match second {
        Ok((pt, sol)) if pt.passes(config) => Ok((pt, sol)),
        Ok((pt, _)) => Err(Error::SolveFailed {
            lambda: to_f64(params.lambda),
            message: format!(
                "diagnostic gates failed (nehari {:e}, pohozaev {:e})",
                to_f64(pt.diagnostics.nehari_res),
                to_f64(pt.diagnostics.pohozaev_full_res)
            ),
        }),
        Err(e) => Err(Error::SolveFailed {
            lambda: to_f64(params.lambda),
            message: e.to_string(),
        }),
    }
}

/// Sequential continuation over a log-spaced grid.
pub fn trace_curve<T: Real>(
    n: usize,
    p: T,
    inner_radius: T,
    lambda_lo: T,
    lambda_hi: T,
    n_points: usize,
    config: &CurveConfig<T>,
) -> Result<MassCurve<T>, TraceError<T>> {
    trace_curve_with(n, p, inner_radius, lambda_lo, lambda_hi, n_points, config, &mut |_| {
        None
    })
}

/// As [`trace_curve`]; `reuse(λ)` may return a stored point to skip a solve.
#[allow(clippy::too_many_arguments)]
pub fn trace_curve_with<T: Real>(
    n: usize,
    p: T,
    inner_radius: T,
    lambda_lo: T,
    lambda_hi: T,
    n_points: usize,
    config: &CurveConfig<T>,
    reuse: &mut dyn FnMut(T) -> Option<CurvePoint<T>>,
) -> Result<MassCurve<T>, TraceError<T>> {
    let grid_spec = GridSpec {
        lambda_lo,
        lambda_hi,
        n_points,
    };
    let mut curve = MassCurve {
        points: Vec::with_capacity(n_points),
        n,
        p,
        inner_radius,
        grid_spec,
    };
    let fail = |curve: &MassCurve<T>, lambda: T, message: String| TraceError {
        lambda,
        message,
        partial: curve.clone(),
    };
    if let Err(e) = ProblemParams::new(n, p, lambda_lo, inner_radius) {
        return Err(fail(&curve, lambda_lo, e.to_string()));
    }
    if !(lambda_lo > T::zero() && lambda_hi > lambda_lo && lambda_hi.is_finite()) || n_points < 8 {
        return Err(fail(
            &curve,
            lambda_lo,
            Error::InvalidArgument("need 0 < lambda_lo < lambda_hi and at least 8 points".into()).to_string(),
        ));
    }
    for lambda in grid_spec.lambdas() {
        if let Some(pt) = reuse(lambda) {
            curve.points.push(pt);
            continue;
        }
        let params = match curve.params_at(lambda) {
            Ok(pr) => pr,
            Err(e) => return Err(fail(&curve, lambda, e.to_string())),
        };
        let hint = curve.points.last().map(|prev| warm_start_hint(prev, lambda, p));
        match solve_point(&params, hint, config) {
            Ok((pt, _)) => curve.points.push(pt),
            Err(e) => return Err(fail(&curve, lambda, e.to_string())),
        }
    }
    Ok(curve)
}

/// Re-solves every point at a tightened integrator tolerance using up to
/// `jobs` threads, warm-started from the stored slopes.
pub fn refine_points<T: Real>(curve: &MassCurve<T>, config: &CurveConfig<T>, jobs: usize) -> Result<MassCurve<T>> {
    refine_points_except(curve, config, jobs, &vec![false; curve.points.len()])
}

/// As [`refine_points`], leaving the points with `keep[i]` untouched.
pub fn refine_points_except<T: Real>(
    curve: &MassCurve<T>,
    config: &CurveConfig<T>,
    jobs: usize,
    keep: &[bool],
) -> Result<MassCurve<T>> {
    let tight = CurveConfig {
        shooter: ShooterConfig {
            integrator: config.shooter.integrator.tightened(lit(10.0)),
            ..config.shooter
        },
        ..*config
    };
    let work: Vec<(usize, &CurvePoint<T>)> = curve
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| !keep.get(*i).copied().unwrap_or(false))
        .collect();
    let mut points = curve.points.clone();
    if work.is_empty() {
        return Ok(curve.clone());
    }
    let jobs = jobs.clamp(1, work.len());
    let chunk = work.len().div_ceil(jobs);
    let results: Vec<(usize, Result<CurvePoint<T>>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = work
            .chunks(chunk)
            .map(|batch| {
                let tight = &tight;
                scope.spawn(move || {
                    batch
                        .iter()
                        .map(|&(i, pt)| {
                            let solved = curve
                                .params_at(pt.lambda)
                                .and_then(|params| solve_point(&params, Some(pt.slope_hint), tight))
                                .map(|(q, _)| q);
                            (i, solved)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("refinement worker panicked"))
            .collect()
    });
    for (i, res) in results {
        points[i] = res?;
    }
    Ok(MassCurve {
        points,
        ..curve.clone()
    })
}

/// Golden-section minimisation of `f` over `[a, b]` in `ln x`, followed by
/// one parabolic step in `x` through the best three evaluated points.
pub fn golden_minimize<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, a: T, b: T, rel_width: T) -> Result<(T, T)> {
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) * lit(0.5);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut evaluated: Vec<(T, T)> = Vec::new();
    let mut eval = |x: T, evaluated: &mut Vec<(T, T)>| -> Result<T> {
        let y = f(x)?;
        evaluated.push((x, y));
        Ok(y)
    };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1.exp(), &mut evaluated)?;
    let mut f2 = eval(x2.exp(), &mut evaluated)?;
    // A log-width w is a relative λ-width of about w.
    let mut guard = 0;
    while hi - lo > rel_width && guard < 200 {
        guard += 1;
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1.exp(), &mut evaluated)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2.exp(), &mut evaluated)?;
        }
    }
    let (mut best_x, mut best_y) = if f1 < f2 { (x1.exp(), f1) } else { (x2.exp(), f2) };

    evaluated.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    evaluated.dedup_by(|p, q| p.0 == q.0);
    if let Some(i) = evaluated.iter().position(|e| e.0 == best_x) {
        if i > 0 && i + 1 < evaluated.len() {
            let (xa, ya) = evaluated[i - 1];
            let (xb, yb) = evaluated[i];
            let (xc, yc) = evaluated[i + 1];
            let num = (xb - xa) * (xb - xa) * (yb - yc) - (xb - xc) * (xb - xc) * (yb - ya);
            let den = (xb - xa) * (yb - yc) - (xb - xc) * (yb - ya);
            if den != T::zero() {
                let x = xb - lit::<T>(0.5) * num / den;
                if x > xa && x < xc && x.is_finite() {
                    let y = f(x)?;
                    if y < best_y {
                        best_x = x;
                        best_y = y;
                    }
                }
            }
        }
    }
    Ok((best_x, best_y))
}

/// Interior minimum bracket `(i−1, i, i+1)` around the smallest `d`.
pub fn minimum_bracket<T: Real>(curve: &MassCurve<T>) -> Result<(usize, usize, usize)> {
    let i = curve.argmin().ok_or(Error::NoInteriorMinimum)?;
    if i == 0 || i + 1 >= curve.points.len() {
        return Err(Error::NoInteriorMinimum);
    }
    Ok((i - 1, i, i + 1))
}

/// Minimiser of `d` inside the bracket using a caller-supplied evaluator.
pub fn refine_extremum_by<T: Real, F: FnMut(T) -> Result<T>>(
    curve: &MassCurve<T>,
    f: F,
    rel_width: T,
) -> Result<(T, T)> {
    let (a, _, c) = minimum_bracket(curve)?;
    golden_minimize(f, curve.points[a].lambda, curve.points[c].lambda, rel_width)
}

/// `(λ̂, η)` by golden section with fresh solves; also returns the solved
/// point at `λ̂`.
pub fn refine_extremum<T: Real>(curve: &MassCurve<T>, config: &CurveConfig<T>) -> Result<(T, T, CurvePoint<T>)> {
    let (_, mid, _) = minimum_bracket(curve)?;
    let anchor = curve.points[mid].clone();
    let solve = |lambda: T| -> Result<(CurvePoint<T>, RadialSolution<T>)> {
        let params = curve.params_at(lambda)?;
        solve_point(&params, Some(warm_start_hint(&anchor, lambda, curve.p)), config)
    };
    let (lambda_hat, _) = refine_extremum_by(curve, |l| solve(l).map(|(pt, _)| pt.d), config.refine_rel_width)?;
    let (point, _) = solve(lambda_hat)?;
    Ok((lambda_hat, point.d, point))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CrossingKind {
    Transversal,
    Tangency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing<T> {
    pub lambda: T,
    pub kind: CrossingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCount<T> {
    pub crossings: Vec<Crossing<T>>,
}

impl<T> SolutionCount<T> {
    pub fn transversal(&self) -> usize {
        self.crossings
            .iter()
            .filter(|c| c.kind == CrossingKind::Transversal)
            .count()
    }

    pub fn tangencies(&self) -> usize {
        self.crossings
            .iter()
            .filter(|c| c.kind == CrossingKind::Tangency)
            .count()
    }

    /// Number of `λ` with `d(λ) = c`, a touching extremum counted once.
    pub fn total(&self) -> usize {
        self.crossings.len()
    }
}

/// Relative band within which a sample is treated as lying on the level.
pub const LEVEL_TOLERANCE: f64 = 1e-12;

/// Solutions of `d(λ) = c` along the piecewise-linear interpolant.
pub fn count_solutions<T: Real>(curve: &MassCurve<T>, c: T) -> SolutionCount<T> {
    let pts = &curve.points;
    let band = lit::<T>(LEVEL_TOLERANCE) * c.abs();
    let sign = |d: T| -> i8 {
        let g = d - c;
        if g.abs() <= band {
            0
        } else if g > T::zero() {
            1
        } else {
            -1
        }
    };
    let s: Vec<i8> = pts.iter().map(|pt| sign(pt.d)).collect();
    let mut crossings = Vec::new();
    for i in 0..pts.len() {
        if s[i] == 0 {
            // Nearest nonzero signs on either side decide the kind.
            let left = s[..i].iter().rev().find(|&&x| x != 0).copied();
            let right = s[i + 1..].iter().find(|&&x| x != 0).copied();
            // A run of on-level samples is reported once, at its first point.
            if i > 0 && s[i - 1] == 0 {
                continue;
            }
            let kind = match (left, right) {
                (Some(a), Some(b)) if a != b => CrossingKind::Transversal,
                _ => CrossingKind::Tangency,
            };
            crossings.push(Crossing {
                lambda: pts[i].lambda,
                kind,
            });
        }
        if i + 1 < pts.len() && s[i] * s[i + 1] == -1 {
            let (a, b) = (&pts[i], &pts[i + 1]);
            let t = (c - a.d) / (b.d - a.d);
            crossings.push(Crossing {
                lambda: a.lambda + t * (b.lambda - a.lambda),
                kind: CrossingKind::Transversal,
            });
        }
    }
    SolutionCount { crossings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Indeterminate,
}

impl StabilityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityLabel::Stable => "STABLE",
            StabilityLabel::Unstable => "UNSTABLE",
            StabilityLabel::Indeterminate => "INDETERMINATE",
        }
    }
}

/// `d'(λ)` at every point: three-point formula on the nonuniform grid
/// inside, one-sided three-point formulas at the ends.
pub fn mass_derivative<T: Real>(lambdas: &[T], d: &[T]) -> Vec<T> {
    let n = lambdas.len();
    assert!(n >= 3, "need at least three points");
    // Derivative at x[j] of the parabola through (x[a], x[b], x[c]).
    let parabola = |a: usize, b: usize, c: usize, j: usize| -> T {
        let (x0, x1, x2) = (lambdas[a], lambdas[b], lambdas[c]);
        let x = lambdas[j];
        d[a] * (lit::<T>(2.0) * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + d[b] * (lit::<T>(2.0) * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + d[c] * (lit::<T>(2.0) * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|j| match j {
            0 => parabola(0, 1, 2, 0),
            j if j == n - 1 => parabola(n - 3, n - 2, n - 1, j),
            j => parabola(j - 1, j, j + 1, j),
        })
        .collect()
}

pub fn stability_classify<T: Real>(curve: &MassCurve<T>, tol_rel: T) -> Vec<StabilityLabel> {
    let lambdas = curve.lambdas();
    let d = curve.masses();
    if lambdas.len() < 3 {
        return vec![StabilityLabel::Indeterminate; lambdas.len()];
    }
    label_derivatives(&lambdas, &d, tol_rel)
}

pub fn label_derivatives<T: Real>(lambdas: &[T], d: &[T], tol_rel: T) -> Vec<StabilityLabel> {
    mass_derivative(lambdas, d)
        .into_iter()
        .enumerate()
        .map(|(i, dd)| {
            let scale = tol_rel * d[i].abs() / lambdas[i];
            if dd > scale {
                StabilityLabel::Stable
            } else if dd < -scale {
                StabilityLabel::Unstable
            } else {
                StabilityLabel::Indeterminate
            }
        })
        .collect()
}

/// Direction of `d` (or `r̄`) as `λ` moves toward one end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Trend {
    Growing,
    Decaying,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointTrends<T> {
    /// Least-squares slope of `ln d` against `ln λ` over the first points.
    pub low_slope: T,
    /// Trend of `d` as `λ → 0`.
    pub low: Trend,
    pub high_slope: T,
    /// Trend of `d` as `λ → ∞`.
    pub high: Trend,
    /// Slope of `ln r̄` over the last points; growth suggests `r̄ → ∞`.
    pub r_bar_high_slope: T,
    pub r_bar_high: Trend,
    pub threshold: T,
}

fn loglog_slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n: T = from_usize(x.len());
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ly.iter().fold(T::zero(), |a, &b| a + b) / n;
    let sxy = lx
        .iter()
        .zip(&ly)
        .fold(T::zero(), |a, (&u, &v)| a + (u - mx) * (v - my));
    let sxx = lx.iter().fold(T::zero(), |a, &u| a + (u - mx) * (u - mx));
    sxy / sxx
}

pub fn endpoint_trends<T: Real>(curve: &MassCurve<T>, points: usize, threshold: T) -> EndpointTrends<T> {
    let lambdas = curve.lambdas();
    let d = curve.masses();
    let r_bar: Vec<T> = curve.points.iter().map(|pt| pt.r_bar).collect();
    let k = points.min(lambdas.len()).max(2);
    let n = lambdas.len();
    let low_slope = loglog_slope(&lambdas[..k], &d[..k]);
    let high_slope = loglog_slope(&lambdas[n - k..], &d[n - k..]);
    let r_slope = loglog_slope(&lambdas[n - k..], &r_bar[n - k..]);
    // Toward λ → 0 a positive slope means d shrinks.
    let classify = |slope: T, toward_zero: bool| {
        let s = if toward_zero { -slope } else { slope };
        if s > threshold {
            Trend::Growing
        } else if s < -threshold {
            Trend::Decaying
        } else {
            Trend::Flat
        }
    };
    EndpointTrends {
        low_slope,
        low: classify(low_slope, true),
        high_slope,
        high: classify(high_slope, false),
        r_bar_high_slope: r_slope,
        r_bar_high: classify(r_slope, false),
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ThresholdKind {
    InteriorMin,
    InfAtZero,
    InfAtInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport<T> {
    pub regime: Regime,
    pub case_label: String,
    pub eta: T,
    /// Minimiser when the infimum is an interior minimum.
    pub lambda_hat: Option<T>,
    pub kind: ThresholdKind,
    /// Whether `eta` is a minimum attained inside the window.
    pub attained: bool,
    /// `λ` window actually traced (already divided by `R²`).
    pub window: (T, T),
    /// Smallest mass seen over the traced points.
    pub window_min: T,
    pub inner_radius: T,
    pub trend_flags: EndpointTrends<T>,
}

/// Threshold for `(N, p, R)`; dispatches on the existence regime.
pub fn threshold<T: Real>(n: usize, p: T, inner_radius: T, config: &CurveConfig<T>) -> Result<ThresholdReport<T>> {
    threshold_with(n, p, inner_radius, config, &mut |_| None).map(|(r, _)| r)
}

/// As [`threshold`], also returning the traced curve (with the refined point
/// inserted) and allowing stored points to be reused.
pub fn threshold_with<T: Real>(
    n: usize,
    p: T,
    inner_radius: T,
    config: &CurveConfig<T>,
    reuse: &mut dyn FnMut(T) -> Option<CurvePoint<T>>,
) -> Result<(ThresholdReport<T>, MassCurve<T>)> {
    let params = ProblemParams::new(n, p, T::one(), inner_radius)?;
    let regime = params.regime();
    let r2 = inner_radius * inner_radius;
    let window = (config.window.0 / r2, config.window.1 / r2);
    let mut curve = trace_curve_with(
        n,
        p,
        inner_radius,
        window.0,
        window.1,
        config.window_points,
        config,
        reuse,
    )?;
    let trends = endpoint_trends(&curve, config.trend_points, config.trend_threshold);
    let i_min = curve.argmin().ok_or(Error::NoInteriorMinimum)?;
    let window_min = curve.points[i_min].d;
    let last = curve.points.len() - 1;
    let endpoint_kind = if i_min == 0 {
        ThresholdKind::InfAtZero
    } else if i_min == last {
        ThresholdKind::InfAtInfinity
    } else {
        ThresholdKind::InteriorMin
    };

    let report = |eta: T, lambda_hat: Option<T>, kind: ThresholdKind, attained: bool| ThresholdReport {
        regime,
        case_label: regime.case_label().to_string(),
        eta,
        lambda_hat,
        kind,
        attained,
        window,
        window_min,
        inner_radius,
        trend_flags: trends,
    };

    let out = match regime {
        Regime::MassSuperOrCritical => match refine_extremum(&curve, config) {
            Ok((lambda_hat, eta, point)) => {
                curve.insert(point);
                report(eta.min(window_min), Some(lambda_hat), ThresholdKind::InteriorMin, true)
            }
            Err(Error::NoInteriorMinimum) => report(window_min, None, endpoint_kind, false),
            Err(e) => return Err(e),
        },
        Regime::TwoDP6 => {
            if trends.high == Trend::Decaying || i_min == last {
                report(window_min, None, ThresholdKind::InfAtInfinity, false)
            } else {
                report(
                    window_min,
                    None,
                    endpoint_kind,
                    endpoint_kind == ThresholdKind::InteriorMin,
                )
            }
        }
        Regime::TwoDP4 => {
            if trends.low == Trend::Decaying || i_min == 0 {
                report(window_min, None, ThresholdKind::InfAtZero, false)
            } else {
                report(
                    window_min,
                    None,
                    endpoint_kind,
                    endpoint_kind == ThresholdKind::InteriorMin,
                )
            }
        }
        Regime::TwoDPGt6 => report(T::zero(), None, ThresholdKind::InfAtInfinity, false),
        Regime::MassSubcritical => report(T::zero(), None, ThresholdKind::InfAtZero, false),
    };
    Ok((out, curve))
}

/// `R^{N − 4/(p−2)} η`.
pub fn rescale_threshold<T: Real>(eta_at_r1: T, n: usize, p: T, radius: T) -> Result<T> {
    if !(eta_at_r1 >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "threshold {eta_at_r1} must be nonnegative"
        )));
    }
    if !(radius > T::zero()) {
        return Err(Error::BadRadius(to_f64(radius)));
    }
    if p == lit(2.0) {
        return Err(Error::BadExponent {
            p: to_f64(p),
            two_star: f64::NAN,
        });
    }
    Ok(radius.powf(mass_scaling_exponent(n, p)) * eta_at_r1)
}

/// `N − 4/(p−2)`.
pub fn mass_scaling_exponent<T: Real>(n: usize, p: T) -> T {
    from_usize::<T>(n) - lit::<T>(4.0) / (p - lit(2.0))
}

/// Maps a solution on `{|x| > R₀}` at parameter `λ` to the solution on
/// `{|x| > R}` at `λ R₀²/R²`: with `ρ = R/R₀`,
/// `u_R(r) = ρ^{2/(2−p)} u(r/ρ)`.
pub fn transform_solution<T: Real>(sol: &RadialSolution<T>, radius: T) -> Result<RadialSolution<T>> {
    let rho = radius / sol.params.inner_radius;
    let two = lit::<T>(2.0);
    let lambda = sol.params.lambda / (rho * rho);
    let params = ProblemParams::new(sol.params.n, sol.params.p, lambda, radius)?;
    let a = rho.powf(two / (two - sol.params.p));
    let b = a / rho;
    let grid = sol
        .grid
        .iter()
        .map(|g| GridPoint {
            r: if g.r == sol.params.inner_radius {
                radius
            } else {
                g.r * rho
            },
            u: g.u * a,
            v: g.v * b,
        })
        .collect();
    let tail = TailData {
        r_match: sol.tail.r_match * rho,
        u_match: sol.tail.u_match * a,
        decay_rate: sol.tail.decay_rate / rho,
        power: sol.tail.power,
    };
    Ok(RadialSolution {
        params,
        slope: sol.slope * b,
        grid,
        r_bar: sol.r_bar * rho,
        u_max: sol.u_max * a,
        tail,
        stats: sol.stats.clone(),
    })
}
