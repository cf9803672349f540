//! The radial ODE `u'' + ((N-1)/r) u' = λu - |u|^{p-2}u` and an adaptive
//! Dormand–Prince 5(4) integrator with dense output and terminal events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemParams;
use crate::scalar::{lit, to_f64, Real};

/// A point `(r, u, u')` on a radial trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState<T> {
    pub r: T,
    pub u: T,
    pub v: T,
}

impl<T: Real> OdeState<T> {
    pub fn new(r: T, u: T, v: T) -> Self {
        Self { r, u, v }
    }

    /// Dirichlet start on the inner sphere with boundary slope `s`.
    pub fn boundary(params: &ProblemParams<T>, slope: T) -> Self {
        Self::new(params.inner_radius, T::zero(), slope)
    }
}

/// Step-size control and termination settings.
///
/// `abs_tol` is measured in the natural units of the problem: the absolute
/// tolerance on `u` is `abs_tol · λ^{1/(p-2)}` and on `u'` it is that times
/// `√λ`. Unset optional fields are resolved from the problem scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: Option<T>,
    pub r_max: Option<T>,
    pub u_blowup_cap: Option<T>,
    pub decay_threshold: T,
    pub max_steps: usize,
}

impl<T: Real> Default for IntegratorConfig<T> {
    /// `1e-10` relative and `1e-12` absolute, floored at a small multiple of
    /// the scalar's epsilon so narrow types still get attainable targets.
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            rel_tol: lit::<T>(1e-10).max(lit::<T>(100.0) * eps),
            abs_tol: lit::<T>(1e-12).max(lit::<T>(10.0) * eps),
            max_step: None,
            r_max: None,
            u_blowup_cap: None,
            decay_threshold: lit(1e-8),
            max_steps: 2_000_000,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return Err(Error::InvalidArgument("rel_tol and abs_tol must be positive".into()));
        }
        Ok(())
    }

    /// Same settings with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: T) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }

    /// `r_max` actually used: the configured value, else
    /// `r̄_estimate + 30/√λ` with `r̄_estimate = R + 10/√λ`.
    pub fn resolved_r_max(&self, params: &ProblemParams<T>) -> T {
        self.r_max
            .unwrap_or_else(|| params.inner_radius + lit::<T>(40.0) * params.length_scale())
    }

    /// Blow-up cap: configured value, else `10 · λ^{1/(p-2)}`.
    pub fn resolved_cap(&self, params: &ProblemParams<T>) -> T {
        self.u_blowup_cap
            .unwrap_or_else(|| lit::<T>(10.0) * params.amplitude_scale())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    /// `u` reached zero from above with `u' < 0`.
    ZeroCrossing,
    /// A second stationary point (a local minimum with `u > 0`).
    Turnaround,
    /// `u` exceeded the blow-up cap.
    Blowup,
    ReachedRmaxDecayed,
    ReachedRmaxUndecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminationEvent<T> {
    pub kind: EventKind,
    pub r_event: T,
    pub state: OdeState<T>,
}

/// Right-hand side of a first-order system `y' = f(r, y)` with `y = (u, u')`.
pub trait OdeSystem<T> {
    fn eval(&self, r: T, y: [T; 2]) -> [T; 2];
}

/// The radial equation. `damping` is the coefficient of `u'/r`: `N - 1` for
/// the actual problem, `0` for its autonomous (one-dimensional) limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOde<T> {
    pub damping: T,
    pub p: T,
    pub lambda: T,
}

impl<T: Real> RadialOde<T> {
    pub fn new(params: &ProblemParams<T>) -> Self {
        Self {
            damping: params.damping(),
            p: params.p,
            lambda: params.lambda,
        }
    }

    pub fn autonomous(params: &ProblemParams<T>) -> Self {
        Self {
            damping: T::zero(),
            ..Self::new(params)
        }
    }
}

impl<T: Real> OdeSystem<T> for RadialOde<T> {
    #[inline]
    fn eval(&self, r: T, y: [T; 2]) -> [T; 2] {
        let [u, v] = y;
        let nonlinear = u.abs().powf(self.p - lit(2.0)) * u;
        [v, -self.damping / r * v + self.lambda * u - nonlinear]
    }
}

/// `(du/dr, dv/dr)` for the radial problem, with the odd extension
/// `|u|^{p-2} u` of the nonlinearity.
pub fn rhs<T: Real>(state: &OdeState<T>, params: &ProblemParams<T>) -> (T, T) {
    let [du, dv] = RadialOde::new(params).eval(state.r, [state.u, state.v]);
    (du, dv)
}

/// `½v² + |u|^p/p − μu²/2`, conserved by the autonomous flow with `μ = λ`.
pub fn energy_autonomous<T: Real>(u: T, v: T, p: T, mu: T) -> T {
    let half = lit::<T>(0.5);
    half * v * v + u.abs().powf(p) / p - mu * u * u * half
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];
// Continuous extension (Shampine): y(r0 + θh) = y0 + h Σ_i k_i Σ_j P[i][j] θ^{j+1}.
const P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

/// One accepted step together with the stage derivatives needed for its
/// continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<T> {
    pub r0: T,
    pub h: T,
    pub y0: [T; 2],
    pub y1: [T; 2],
    k: [[T; 2]; 7],
}

impl<T: Real> DenseStep<T> {
    pub fn r1(&self) -> T {
        self.r0 + self.h
    }

    /// Interpolated `(u, u')` at `r0 + θh`, `θ ∈ [0, 1]`.
    pub fn eval_theta(&self, theta: T) -> [T; 2] {
        let mut weights = [T::zero(); 7];
        for (w, row) in weights.iter_mut().zip(P.iter()) {
            // Horner in θ for Σ_j P_j θ^{j+1}.
            let mut acc = T::zero();
            for c in row.iter().rev() {
                acc = (acc + lit::<T>(*c)) * theta;
            }
            *w = acc;
        }
        let mut out = self.y0;
        for (c, y) in out.iter_mut().enumerate() {
            let mut incr = T::zero();
            for (w, k) in weights.iter().zip(self.k.iter()) {
                incr = incr + *w * k[c];
            }
            *y = *y + self.h * incr;
        }
        out
    }

    pub fn eval(&self, r: T) -> [T; 2] {
        self.eval_theta((r - self.r0) / self.h)
    }
}

/// Dense-output trajectory on `[r_start, r_end]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    steps: Vec<DenseStep<T>>,
    r_end: T,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> &[DenseStep<T>] {
        &self.steps
    }

    pub fn r_start(&self) -> T {
        self.steps.first().map(|s| s.r0).unwrap_or(self.r_end)
    }

    pub fn r_end(&self) -> T {
        self.r_end
    }

    /// Step boundaries `r_0 < r_1 < …`, ending with `r_end`.
    pub fn abscissae(&self) -> Vec<T> {
        let mut out: Vec<T> = self.steps.iter().map(|s| s.r0).collect();
        out.push(self.r_end);
        out
    }

    /// Interpolated `(u, u')` at `r`, clamped to the covered interval.
    pub fn eval(&self, r: T) -> Option<[T; 2]> {
        if self.steps.is_empty() {
            return None;
        }
        let r = r.max(self.r_start()).min(self.r_end);
        let idx = self.steps.partition_point(|s| s.r1() < r);
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        Some(step.eval(r))
    }
}

/// Per-component absolute tolerances `(u, u')` and the relative tolerance.
#[derive(Debug, Clone, Copy)]
struct ErrorScale<T> {
    atol: [T; 2],
    rtol: T,
}

impl<T: Real> ErrorScale<T> {
    fn norm(&self, err: [T; 2], y0: [T; 2], y1: [T; 2]) -> T {
        let mut acc = T::zero();
        for i in 0..2 {
            let sc = self.atol[i] + self.rtol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            acc = acc + e * e;
        }
        (acc * lit(0.5)).sqrt()
    }
}

fn dp_step<T: Real, S: OdeSystem<T>>(system: &S, r: T, y: [T; 2], k0: [T; 2], h: T) -> ([T; 2], [[T; 2]; 7], [T; 2]) {
    let mut k = [[T::zero(); 2]; 7];
    k[0] = k0;
    for s in 1..7 {
        let mut ys = y;
        for (c, ysc) in ys.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    acc = acc + lit::<T>(a) * k[j][c];
                }
            }
            *ysc = *ysc + h * acc;
        }
        k[s] = system.eval(r + lit::<T>(C[s]) * h, ys);
    }
    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    let mut y1 = y;
    for (c, y1c) in y1.iter_mut().enumerate() {
        let mut acc = T::zero();
        for j in 0..6 {
            acc = acc + lit::<T>(A[6][j]) * k[j][c];
        }
        *y1c = *y1c + h * acc;
    }
    let mut err = [T::zero(); 2];
    for (c, ec) in err.iter_mut().enumerate() {
        let mut acc = T::zero();
        for j in 0..7 {
            acc = acc + lit::<T>(E[j]) * k[j][c];
        }
        *ec = h * acc;
    }
    (y1, k, err)
}

fn initial_step<T: Real, S: OdeSystem<T>>(
    system: &S,
    r: T,
    y: [T; 2],
    f0: [T; 2],
    scale: &ErrorScale<T>,
    h_max: T,
) -> T {
    let sc = |i: usize, yi: T| scale.atol[i] + scale.rtol * yi.abs();
    let rms = |a: [T; 2], b: [T; 2]| {
        let x0 = a[0] / sc(0, b[0]);
        let x1 = a[1] / sc(1, b[1]);
        ((x0 * x0 + x1 * x1) * lit(0.5)).sqrt()
    };
    let d0 = rms(y, y);
    let d1 = rms(f0, y);
    let tiny = lit::<T>(1e-5);
    let h0 = if d0 < tiny || d1 < tiny {
        lit::<T>(1e-6)
    } else {
        lit::<T>(0.01) * d0 / d1
    }
    .min(h_max);
    let y1 = [y[0] + h0 * f0[0], y[1] + h0 * f0[1]];
    let f1 = system.eval(r + h0, y1);
    let d2 = rms([f1[0] - f0[0], f1[1] - f0[1]], y) / h0;
    let h1 = if d1.max(d2) <= lit(1e-15) {
        (h0 * lit(1e-3)).max(lit(1e-6))
    } else {
        (lit::<T>(0.01) / d1.max(d2)).powf(lit(0.2))
    };
    (h0 * lit(100.0)).min(h1).min(h_max)
}

/// Finds `θ ∈ [0, 1]` where component `comp` of the step interpolant equals
/// `target`, given a sign change across the step. Bisection to `|Δr| ≤ tol`.
pub(crate) fn polish_root<T: Real>(step: &DenseStep<T>, comp: usize, target: T, tol: T) -> T {
    let f = |theta: T| step.eval_theta(theta)[comp] - target;
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut flo = f(lo);
    for _ in 0..200 {
        if (hi - lo) * step.h <= tol {
            break;
        }
        let mid = (lo + hi) * lit(0.5);
        let fm = f(mid);
        if fm == T::zero() {
            return step.r0 + mid * step.h;
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    step.r0 + (lo + hi) * lit::<T>(0.5) * step.h
}

/// Integrates the radial problem from `state0` until the first terminal event.
pub fn integrate<T: Real>(
    state0: OdeState<T>,
    params: &ProblemParams<T>,
    config: &IntegratorConfig<T>,
) -> Result<(Trajectory<T>, TerminationEvent<T>)> {
    integrate_system(&RadialOde::new(params), state0, params, config)
}

/// Event-terminated integration of an arbitrary system sharing the
/// radial problem's scales (used for the autonomous limit).
pub fn integrate_system<T: Real, S: OdeSystem<T>>(
    system: &S,
    state0: OdeState<T>,
    params: &ProblemParams<T>,
    config: &IntegratorConfig<T>,
) -> Result<(Trajectory<T>, TerminationEvent<T>)> {
    config.validate()?;
    if state0.r < params.inner_radius {
        return Err(Error::InvalidArgument(format!(
            "start radius {} lies inside the excluded ball (R = {})",
            to_f64(state0.r),
            to_f64(params.inner_radius)
        )));
    }
    let r_max = config.resolved_r_max(params);
    if !(r_max > state0.r) {
        return Err(Error::InvalidArgument("r_max must exceed the start radius".into()));
    }
    let cap = config.resolved_cap(params);
    let amp = params.amplitude_scale();
    let scale = ErrorScale {
        atol: [config.abs_tol * amp, config.abs_tol * amp * params.lambda.sqrt()],
        rtol: config.rel_tol,
    };
    let h_max = config
        .max_step
        .unwrap_or_else(|| params.length_scale().min(r_max - state0.r));
    let root_tol = lit::<T>(1e-10);

    let mut r = state0.r;
    let mut y = [state0.u, state0.v];
    let mut f = system.eval(r, y);
    let mut h = initial_step(system, r, y, f, &scale, h_max);
    let mut steps: Vec<DenseStep<T>> = Vec::new();
    let mut seen_max = false;
    let mut u_peak = y[0].abs();
    let h_min_factor = lit::<T>(16.0) * T::epsilon();

    loop {
        if steps.len() >= config.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: config.max_steps,
                r: to_f64(r),
            });
        }
        let remaining = r_max - r;
        if remaining <= h_min_factor * r_max {
            let state = OdeState::new(r, y[0], y[1]);
            let decayed = y[0].abs() <= config.decay_threshold * u_peak && y[1] <= T::zero();
            let kind = if decayed {
                EventKind::ReachedRmaxDecayed
            } else {
                EventKind::ReachedRmaxUndecided
            };
            return Ok((
                Trajectory { steps, r_end: r },
                TerminationEvent {
                    kind,
                    r_event: r,
                    state,
                },
            ));
        }
        let h_try = h.min(remaining).min(h_max);
        let (y1, k, err) = dp_step(system, r, y, f, h_try);
        let en = scale.norm(err, y, y1);
        if !en.is_finite() || en > T::one() {
            let factor = if en.is_finite() {
                (lit::<T>(0.9) * en.powf(lit(-0.2))).max(lit(0.2))
            } else {
                lit(0.1)
            };
            h = h_try * factor;
            if h < h_min_factor * r.abs().max(T::one()) {
                return Err(Error::StepSizeUnderflow { r: to_f64(r) });
            }
            continue;
        }
        let step = DenseStep {
            r0: r,
            h: h_try,
            y0: y,
            y1,
            k,
        };
        let tol = root_tol * r;

        // Candidate events within the step; keep the earliest.
        let mut event: Option<(EventKind, T)> = None;
        let mut consider = |kind: EventKind, at: T| match event {
            Some((_, prev)) if prev <= at => {}
            _ => event = Some((kind, at)),
        };
        let max_in_step = y[1] > T::zero() && y1[1] <= T::zero();
        if y[0] > T::zero() && y1[0] <= T::zero() {
            consider(EventKind::ZeroCrossing, polish_root(&step, 0, T::zero(), tol));
        }
        if seen_max && !max_in_step && y[1] < T::zero() && y1[1] >= T::zero() && y1[0] > T::zero() {
            consider(EventKind::Turnaround, polish_root(&step, 1, T::zero(), tol));
        }
        if y1[0] > cap {
            consider(EventKind::Blowup, polish_root(&step, 0, cap, tol));
        }
        if max_in_step {
            seen_max = true;
        }
        u_peak = u_peak.max(y1[0].abs());

        if let Some((kind, at)) = event {
            let [u, v] = step.eval(at);
            steps.push(step);
            return Ok((
                Trajectory { steps, r_end: at },
                TerminationEvent {
                    kind,
                    r_event: at,
                    state: OdeState::new(at, u, v),
                },
            ));
        }

        steps.push(step);
        r = r + h_try;
        y = y1;
        f = k[6];
        let grow = if en == T::zero() {
            lit(10.0)
        } else {
            (lit::<T>(0.9) * en.powf(lit(-0.2))).min(lit(10.0)).max(lit(0.2))
        };
        h = h_try * grow;
    }
}
