//! Shooting on the boundary slope `s = u'(R)` for the decaying positive
//! solution.
//!
//! A shot that starts with too little energy becomes trapped and turns
//! around; one with too much crosses zero (or exceeds the blow-up cap). Which
//! event kind means "slope too small" is decided at runtime by probing a
//! tiny and a huge slope, then bisection narrows the bracket.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemParams;
use crate::radial_ode::{integrate, polish_root, EventKind, IntegratorConfig, OdeState, TerminationEvent, Trajectory};
use crate::scalar::{lit, to_f64, Real};
pub use crate::solution::{GridPoint, RadialSolution, SolverStats, TailData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShotClass {
    Undershoot,
    Overshoot,
    Converged,
}

/// Which non-blow-up event kind signals a slope below `s*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    pub undershoot_kind: EventKind,
}

impl Orientation {
    pub fn classify<T: Real>(&self, event: &TerminationEvent<T>) -> Option<ShotClass> {
        match event.kind {
            EventKind::ReachedRmaxDecayed => Some(ShotClass::Converged),
            EventKind::ReachedRmaxUndecided => None,
            EventKind::Blowup => Some(ShotClass::Overshoot),
            k if k == self.undershoot_kind => Some(ShotClass::Undershoot),
            _ => Some(ShotClass::Overshoot),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShooterConfig<T> {
    pub integrator: IntegratorConfig<T>,
    /// Stop bisecting once `(s_hi - s_lo) / s_lo` falls below this.
    pub bracket_rel_width: T,
    pub max_bisections: usize,
    pub max_doublings: usize,
    /// A warm-start hint `h` is first tried as the bracket `(h/f, h·f)`.
    pub hint_factor: T,
    /// The tail is attached where `u` drops below this fraction of `u_max`.
    pub match_level: T,
    /// How many times an undecided shot may double its integration range.
    pub max_range_doublings: usize,
}

impl<T: Real> Default for ShooterConfig<T> {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            bracket_rel_width: lit::<T>(1e-12).max(lit::<T>(10.0) * T::epsilon()),
            max_bisections: 200,
            max_doublings: 200,
            hint_factor: lit(1.1),
            match_level: lit(1e-8),
            max_range_doublings: 6,
        }
    }
}

/// A single shot: the trajectory and how it ended.
#[derive(Debug, Clone)]
pub struct Shot<T> {
    pub slope: T,
    pub class: ShotClass,
    pub trajectory: Trajectory<T>,
    pub event: TerminationEvent<T>,
}

/// Scale anchor `s₀ = λ^{1/(p-2) + 1/2}`: amplitude `λ^{1/(p-2)}` over width
/// `λ^{-1/2}`.
pub fn slope_anchor<T: Real>(params: &ProblemParams<T>) -> T {
    params.amplitude_scale() * params.lambda.sqrt()
}

/// Stateful shooter for one problem instance; caches the orientation.
#[derive(Debug, Clone)]
pub struct Shooter<T> {
    params: ProblemParams<T>,
    config: ShooterConfig<T>,
    orientation: Option<Orientation>,
    stats: SolverStats,
}

impl<T: Real> Shooter<T> {
    pub fn new(params: ProblemParams<T>, config: ShooterConfig<T>) -> Result<Self> {
        config.integrator.validate()?;
        let (_, two_star) = crate::problem::critical_exponents::<T>(params.n)?;
        if two_star.is_finite() && two_star - params.p < lit(1e-3) {
            return Err(Error::StiffFailure(format!(
                "p = {} lies within 1e-3 of the critical Sobolev exponent {}",
                params.p, two_star
            )));
        }
        Ok(Self {
            params,
            config,
            orientation: None,
            stats: SolverStats {
                method: "shooting".into(),
                ..Default::default()
            },
        })
    }

    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    fn integrate_once(&mut self, s: T, r_max: T) -> Result<(Trajectory<T>, TerminationEvent<T>)> {
        self.stats.integrations += 1;
        let cfg = IntegratorConfig {
            r_max: Some(r_max),
            ..self.config.integrator
        };
        integrate(OdeState::boundary(&self.params, s), &self.params, &cfg)
    }

    /// Integrates one shot, doubling the range while the outcome is undecided.
    fn raw_shot(&mut self, s: T) -> Result<(Trajectory<T>, TerminationEvent<T>)> {
        let r0 = self.params.inner_radius;
        let mut r_max = self.config.integrator.resolved_r_max(&self.params);
        for attempt in 0..=self.config.max_range_doublings {
            let (traj, ev) = self.integrate_once(s, r_max)?;
            if ev.kind != EventKind::ReachedRmaxUndecided || attempt == self.config.max_range_doublings {
                return Ok((traj, ev));
            }
            r_max = r0 + (r_max - r0) * lit(2.0);
        }
        unreachable!()
    }

    /// Determines (once) which event kind signals a slope that is too small.
    pub fn orientation(&mut self) -> Result<Orientation> {
        if let Some(o) = self.orientation {
            return Ok(o);
        }
        let anchor = slope_anchor(&self.params);
        let factor = lit::<T>(2.0).powi(20);
        let (_, tiny) = self.raw_shot(anchor / factor)?;
        let (_, huge) = self.raw_shot(anchor * factor)?;
        let undershoot_kind = match tiny.kind {
            EventKind::ZeroCrossing | EventKind::Turnaround => tiny.kind,
            other => {
                return Err(Error::NoBracket(format!(
                    "orientation probe with a tiny slope ended in {other:?}"
                )))
            }
        };
        let consistent = huge.kind == EventKind::Blowup
            || (matches!(huge.kind, EventKind::ZeroCrossing | EventKind::Turnaround) && huge.kind != undershoot_kind);
        if !consistent {
            return Err(Error::NoBracket(format!(
                "orientation probes disagree: tiny slope {:?}, huge slope {:?}",
                tiny.kind, huge.kind
            )));
        }
        let o = Orientation { undershoot_kind };
        self.orientation = Some(o);
        Ok(o)
    }

    pub fn shoot(&mut self, s: T) -> Result<Shot<T>> {
        if !(s > T::zero()) {
            return Err(Error::InvalidSlope(to_f64(s)));
        }
        let orientation = self.orientation()?;
        let (trajectory, event) = self.raw_shot(s)?;
        let class = orientation.classify(&event).ok_or(Error::UndecidedShot {
            s: to_f64(s),
            r_max: to_f64(event.r_event),
        })?;
        Ok(Shot {
            slope: s,
            class,
            trajectory,
            event,
        })
    }

    pub fn classify(&mut self, s: T) -> Result<ShotClass> {
        self.shoot(s).map(|shot| shot.class)
    }

    /// Slopes `(s_under, s_over)` whose shots fall on opposite sides.
    pub fn initial_bracket(&mut self, hint: Option<T>) -> Result<(T, T)> {
        let (under, over, _) = self.bracket_shots(hint)?;
        Ok((under.slope, over.slope))
    }

    fn bracket_shots(&mut self, hint: Option<T>) -> Result<(Shot<T>, Shot<T>, bool)> {
        let two = lit::<T>(2.0);
        let (mut a, mut b) = match hint {
            Some(h) if h > T::zero() && h.is_finite() => {
                let f = self.config.hint_factor;
                (self.shoot(h / f)?, self.shoot(h * f)?)
            }
            _ => {
                let s0 = slope_anchor(&self.params);
                (self.shoot(s0)?, self.shoot(s0 * two)?)
            }
        };
        let mut expansions = 0;
        loop {
            if a.class == ShotClass::Converged {
                return Ok((a.clone(), a, true));
            }
            if b.class == ShotClass::Converged {
                return Ok((b.clone(), b, true));
            }
            if a.class != b.class {
                let (under, over) = if a.class == ShotClass::Undershoot {
                    (a, b)
                } else {
                    (b, a)
                };
                return Ok((under, over, false));
            }
            if expansions >= self.config.max_doublings {
                return Err(Error::NoBracket(format!(
                    "{} doublings from s = {} without a class change",
                    expansions,
                    to_f64(a.slope)
                )));
            }
            expansions += 1;
            self.stats.bracket_expansions += 1;
            // Both on the same side: walk away from it geometrically.
            if a.class == ShotClass::Undershoot {
                let next = b.slope.max(a.slope) * two;
                let keep = if a.slope > b.slope { a } else { b };
                a = keep;
                b = self.shoot(next)?;
            } else {
                let next = b.slope.min(a.slope) / two;
                let keep = if a.slope < b.slope { a } else { b };
                a = keep;
                b = self.shoot(next)?;
            }
        }
    }

    /// Full solve: bracket, bisect, then assemble the profile from the
    /// final undershooting trajectory.
    pub fn solve(&mut self, hint: Option<T>) -> Result<RadialSolution<T>> {
        let (mut under, mut over, converged) = self.bracket_shots(hint)?;
        if !converged {
            let mut iterations = 0;
            loop {
                let lo = under.slope.min(over.slope);
                let width = (under.slope - over.slope).abs() / lo;
                if width <= self.config.bracket_rel_width {
                    break;
                }
                if iterations >= self.config.max_bisections {
                    return Err(Error::MaxIterations(iterations));
                }
                let mid = (under.slope + over.slope) * lit(0.5);
                if mid == under.slope || mid == over.slope {
                    break;
                }
                iterations += 1;
                self.stats.bisections += 1;
                let shot = self.shoot(mid)?;
                match shot.class {
                    ShotClass::Undershoot => under = shot,
                    ShotClass::Overshoot => over = shot,
                    ShotClass::Converged => {
                        under = shot.clone();
                        over = shot;
                        break;
                    }
                }
            }
        }
        self.stats.final_width = to_f64((under.slope - over.slope).abs() / under.slope.min(over.slope));
        let exact = under.class == ShotClass::Converged;
        let slope = if exact {
            under.slope
        } else {
            (under.slope + over.slope) * lit(0.5)
        };
        self.assemble(slope, &under, if exact { None } else { Some(&over) })
    }

    fn assemble(&self, slope: T, main: &Shot<T>, other: Option<&Shot<T>>) -> Result<RadialSolution<T>> {
        let traj = &main.trajectory;
        let steps = traj.steps();
        let root_tol = lit::<T>(1e-12);

        // Location of the maximum: first step where u' changes sign.
        let peak_idx = steps
            .iter()
            .position(|s| s.y0[1] > T::zero() && s.y1[1] <= T::zero())
            .ok_or_else(|| Error::NoBracket("final trajectory has no interior maximum".into()))?;
        let peak_step = &steps[peak_idx];
        let r_bar = polish_root(peak_step, 1, T::zero(), root_tol * peak_step.r0);
        let u_max = peak_step.eval(r_bar)[0];

        // Where the two bracketing shots part ways, the computed profile
        // stops being a trustworthy approximation of the decaying solution.
        let mut r_match = traj.r_end();
        let level = self.config.match_level * u_max;
        for (i, step) in steps.iter().enumerate().skip(peak_idx) {
            let r1 = step.r1().min(traj.r_end());
            if let Some(o) = other {
                let diverged = r1 > o.trajectory.r_end()
                    || o.trajectory
                        .eval(r1)
                        .map(|y| (y[0] - step.y1[0]).abs() > lit::<T>(1e-3) * step.y1[0].abs())
                        .unwrap_or(true);
                if diverged {
                    r_match = step.r0;
                    break;
                }
            }
            if step.y1[0] <= level && step.y0[0] > level {
                r_match = polish_root(step, 0, level, root_tol * step.r0);
                break;
            }
            if i + 1 == steps.len() {
                r_match = r1;
            }
        }
        if r_match <= r_bar {
            return Err(Error::StiffFailure(
                "bracketing shots separated before the maximum; tighten the bracket".into(),
            ));
        }

        let mut grid = Vec::with_capacity(4 * steps.len() + 1);
        let first = steps[0].y0;
        grid.push(GridPoint {
            r: steps[0].r0,
            u: first[0],
            v: first[1],
        });
        for step in steps {
            if step.r0 >= r_match {
                break;
            }
            let end = step.r1().min(r_match);
            if end - step.r0 <= lit::<T>(1e-12) * end {
                break;
            }
            let width = end - step.r0;
            for j in 1..=4 {
                let r = if j == 4 {
                    end
                } else {
                    step.r0 + width * lit::<T>(j as f64 * 0.25)
                };
                let [u, v] = step.eval(r);
                grid.push(GridPoint { r, u, v });
            }
        }
        let last = grid[grid.len() - 1];
        let tail = TailData::for_params(&self.params, last.r, last.u);
        let mut sol = RadialSolution::from_samples(self.params, slope, grid, tail, self.stats.clone());
        // The dense-output peak is sharper than the sampled one.
        sol.r_bar = r_bar;
        sol.u_max = u_max;
        Ok(sol)
    }
}

/// Classifies one shot with slope `s` (bootstrapping the orientation).
pub fn classify_shot<T: Real>(s: T, params: &ProblemParams<T>, config: &ShooterConfig<T>) -> Result<ShotClass> {
    if !(s > T::zero()) {
        return Err(Error::InvalidSlope(to_f64(s)));
    }
    Shooter::new(*params, *config)?.classify(s)
}

pub fn initial_bracket<T: Real>(
    params: &ProblemParams<T>,
    config: &ShooterConfig<T>,
    hint: Option<T>,
) -> Result<(T, T)> {
    Shooter::new(*params, *config)?.initial_bracket(hint)
}

/// The ground state of `-Δu + λu = u^{p-1}` on `{|x| > R}`.
pub fn solve_ground_state<T: Real>(
    params: &ProblemParams<T>,
    config: &ShooterConfig<T>,
    hint: Option<T>,
) -> Result<RadialSolution<T>> {
    Shooter::new(*params, *config)?.solve(hint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, p: f64, lambda: f64) -> ProblemParams<f64> {
        ProblemParams::new(n, p, lambda, 1.0).unwrap()
    }

    #[test]
    fn rejects_nonpositive_slopes() {
        let pr = params(3, 4.0, 1.0);
        let cfg = ShooterConfig::default();
        assert!(matches!(classify_shot(0.0, &pr, &cfg), Err(Error::InvalidSlope(_))));
        assert!(matches!(classify_shot(-1.0, &pr, &cfg), Err(Error::InvalidSlope(_))));
    }

    #[test]
    fn near_critical_exponent_is_refused() {
        let pr = params(3, 6.0 - 5e-4, 1.0);
        assert!(matches!(
            solve_ground_state(&pr, &ShooterConfig::default(), None),
            Err(Error::StiffFailure(_))
        ));
    }

    #[test]
    fn bracket_expands_when_probes_agree() {
        // (s, 2s) with s far below s*: both undershoot, so expansion kicks in.
        let pr = params(3, 4.0, 1.0);
        let mut shooter = Shooter::new(pr, ShooterConfig::default()).unwrap();
        let (lo, hi) = shooter.initial_bracket(Some(1e-3)).unwrap();
        assert!(shooter.stats().bracket_expansions > 0);
        assert_eq!(shooter.classify(lo).unwrap(), ShotClass::Undershoot);
        assert_eq!(shooter.classify(hi).unwrap(), ShotClass::Overshoot);
    }

    #[test]
    fn ground_state_shape() {
        let pr = params(3, 4.0, 1.0);
        let sol = solve_ground_state(&pr, &ShooterConfig::default(), None).unwrap();
        sol.check_invariants().unwrap();
        assert!(sol.stats.final_width <= 1e-12);
        // Transversality: opposite classes just either side of s*.
        let mut shooter = Shooter::new(pr, ShooterConfig::default()).unwrap();
        let below = shooter.classify(sol.slope * (1.0 - 1e-6)).unwrap();
        let above = shooter.classify(sol.slope * (1.0 + 1e-6)).unwrap();
        assert_ne!(below, above);
        // Unique maximum: u' > 0 before r̄, u' < 0 after.
        for g in &sol.grid {
            if g.r < sol.r_bar - 1e-9 {
                assert!(g.v > 0.0, "r = {}", g.r);
            } else if g.r > sol.r_bar + 1e-9 {
                assert!(g.v < 0.0, "r = {}", g.r);
            }
        }
    }

    #[test]
    fn warm_start_needs_few_bisections() {
        let pr = params(3, 4.0, 1.0);
        let cfg = ShooterConfig::default();
        let near = solve_ground_state(&pr.with_lambda(1.01).unwrap(), &cfg, None).unwrap();
        let mut shooter = Shooter::new(pr, cfg).unwrap();
        let sol = shooter.solve(Some(near.slope)).unwrap();
        assert!(shooter.stats().bisections <= 60, "{}", shooter.stats().bisections);
        assert_eq!(shooter.stats().bracket_expansions, 0);
        sol.check_invariants().unwrap();
    }
}
