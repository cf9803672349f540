//! Quadrature over computed profiles: mass, action, Nehari residual, the
//! rescaled profile ω and the one-dimensional soliton `W`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::critical_exponents;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::solution::{GridPoint, RadialSolution};
use crate::special::{adaptive_simpson, binomial, gamma, gamma_half_integer, sech, upper_gamma_scaled};

/// Largest tail share accepted by [`mass`] before the grid is deemed too
/// short.
pub const MAX_TAIL_FRACTION: f64 = 0.01;

/// Half-width of the rescaled window in units of `λ^{-1/2}`.
pub const OMEGA_HALF_WIDTH: f64 = 40.0;

/// Number of samples of the rescaled profile (a multiple of four, plus one).
pub const OMEGA_SAMPLES: usize = 16_001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult<T> {
    pub value: T,
    /// Share of `value` contributed by the analytic tail.
    pub tail_fraction: T,
    pub estimated_error: T,
}

impl<T: Real> QuadratureResult<T> {
    fn zero() -> Self {
        Self {
            value: T::zero(),
            tail_fraction: T::zero(),
            estimated_error: T::zero(),
        }
    }

    fn scaled(self, factor: T) -> Self {
        Self {
            value: self.value * factor,
            tail_fraction: self.tail_fraction,
            estimated_error: self.estimated_error * factor.abs(),
        }
    }
}

/// `|S^{N-1}| = 2π^{N/2} / Γ(N/2)`.
pub fn surface_area<T: Real>(n: usize) -> Result<T> {
    critical_exponents::<T>(n)?;
    let half_n: T = from_usize::<T>(n) * lit(0.5);
    Ok(lit::<T>(2.0) * T::PI().powf(half_n) / gamma_half_integer::<T>(n))
}

/// Which radial density is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Density {
    /// `u²`
    Square,
    /// `|u|^p`
    Power,
    /// `(u')²`
    Gradient,
}

/// Simpson on each 5-point cell with a Richardson correction against the
/// 3-point rule on the same cell.
fn grid_integral<T: Real, F: Fn(&GridPoint<T>) -> T>(sol: &RadialSolution<T>, f: F) -> (T, T) {
    let third = lit::<T>(1.0 / 3.0);
    let four = lit::<T>(4.0);
    let two = lit::<T>(2.0);
    let fifteen = lit::<T>(15.0);
    let mut value = T::zero();
    let mut err = T::zero();
    for cell in sol.cells() {
        let h = (cell[4].r - cell[0].r) * lit(0.25);
        let y: Vec<T> = cell.iter().map(&f).collect();
        let fine = h * third * (y[0] + four * y[1] + two * y[2] + four * y[3] + y[4]);
        let coarse = two * h * third * (y[0] + four * y[2] + y[4]);
        let delta = (fine - coarse) / fifteen;
        value = value + fine + delta;
        err = err + delta.abs();
    }
    (value, err)
}

/// `∫_{r_m}^∞ e^{-c (r - r_m)} r^q dr` in closed form.
fn exp_power_moment<T: Real>(c: T, q: T, r_m: T) -> T {
    if c == T::zero() {
        // Only reached with an integrable power.
        return -(r_m.powf(q + T::one())) / (q + T::one());
    }
    let x = c * r_m;
    r_m.powf(q + T::one()) * upper_gamma_scaled(q + T::one(), x) / x.powf(q + T::one())
}

/// Tail integral of `u^a r^q` for the analytic tail.
fn tail_power<T: Real>(sol: &RadialSolution<T>, a: T, q: T) -> T {
    let t = &sol.tail;
    if t.u_match == T::zero() {
        return T::zero();
    }
    // u^a r^q = u_m^a r_m^{a m} e^{-a k (r - r_m)} r^{q - a m}
    t.u_match.powf(a) * t.r_match.powf(a * t.power) * exp_power_moment(a * t.decay_rate, q - a * t.power, t.r_match)
}

fn tail_integral<T: Real>(sol: &RadialSolution<T>, density: Density, q: T) -> T {
    let two = lit::<T>(2.0);
    match density {
        Density::Square => tail_power(sol, two, q),
        Density::Power => tail_power(sol, sol.params.p, q),
        Density::Gradient => {
            // (u')² = u² (k + m/r)²
            let k = sol.tail.decay_rate;
            let m = sol.tail.power;
            k * k * tail_power(sol, two, q)
                + two * k * m * tail_power(sol, two, q - T::one())
                + m * m * tail_power(sol, two, q - two)
        }
    }
}

/// `|S^{N-1}| ∫_R^∞ density · r^q dr`, grid plus tail.
fn radial_moment<T: Real>(sol: &RadialSolution<T>, density: Density, q: T) -> Result<QuadratureResult<T>> {
    let p = sol.params.p;
    let (grid, err) = grid_integral(sol, |g| {
        let w = match density {
            Density::Square => g.u * g.u,
            Density::Power => g.u.abs().powf(p),
            Density::Gradient => g.v * g.v,
        };
        w * g.r.powf(q)
    });
    let tail = tail_integral(sol, density, q);
    let total = grid + tail;
    if total == T::zero() {
        return Ok(QuadratureResult::zero());
    }
    let area = surface_area::<T>(sol.params.n)?;
    Ok(QuadratureResult {
        value: total,
        tail_fraction: (tail / total).abs(),
        estimated_error: err,
    }
    .scaled(area))
}

/// The six reduced integrals that all identities are built from, each
/// including the `|S^{N-1}|` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    /// `∫ (u')²`
    pub grad: QuadratureResult<T>,
    /// `∫ u²`
    pub mass: QuadratureResult<T>,
    /// `∫ |u|^p`
    pub power: QuadratureResult<T>,
    /// `∫ (u')² / |x|`
    pub grad_weighted: QuadratureResult<T>,
    /// `∫ u² / |x|`
    pub mass_weighted: QuadratureResult<T>,
    /// `∫ |u|^p / |x|`
    pub power_weighted: QuadratureResult<T>,
}

impl<T: Real> Moments<T> {
    pub fn compute(sol: &RadialSolution<T>) -> Result<Self> {
        let q = sol.params.damping();
        let q1 = q - T::one();
        Ok(Self {
            grad: radial_moment(sol, Density::Gradient, q)?,
            mass: radial_moment(sol, Density::Square, q)?,
            power: radial_moment(sol, Density::Power, q)?,
            grad_weighted: radial_moment(sol, Density::Gradient, q1)?,
            mass_weighted: radial_moment(sol, Density::Square, q1)?,
            power_weighted: radial_moment(sol, Density::Power, q1)?,
        })
    }
}

/// `d = ∫ u²` over the exterior domain.
pub fn mass<T: Real>(sol: &RadialSolution<T>) -> Result<QuadratureResult<T>> {
    let res = radial_moment(sol, Density::Square, sol.params.damping())?;
    check_tail(res)
}

fn check_tail<T: Real>(res: QuadratureResult<T>) -> Result<QuadratureResult<T>> {
    if res.tail_fraction > lit(MAX_TAIL_FRACTION) {
        return Err(Error::TailDominates {
            fraction: to_f64(res.tail_fraction),
        });
    }
    Ok(res)
}

/// `Φ_λ(u) = ½∫((u')² + λu²) − (1/p)∫|u|^p`.
pub fn action<T: Real>(sol: &RadialSolution<T>) -> Result<T> {
    let m = Moments::compute(sol)?;
    check_tail(m.mass)?;
    Ok(action_from(&m, sol.params.lambda, sol.params.p))
}

pub(crate) fn action_from<T: Real>(m: &Moments<T>, lambda: T, p: T) -> T {
    lit::<T>(0.5) * (m.grad.value + lambda * m.mass.value) - m.power.value / p
}

/// `|∫(u')² + λ∫u² − ∫|u|^p| / ∫|u|^p`; NaN when `u ≡ 0`.
pub fn nehari_residual<T: Real>(sol: &RadialSolution<T>) -> Result<T> {
    let m = Moments::compute(sol)?;
    Ok(nehari_from(&m, sol.params.lambda))
}

pub(crate) fn nehari_from<T: Real>(m: &Moments<T>, lambda: T) -> T {
    let c = m.power.value;
    (m.grad.value + lambda * m.mass.value - c).abs() / c
}

/// The profile seen from its maximum in natural units,
/// `ω(t) = λ^{1/(2-p)} u(t/√λ + r̄)`, on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledProfile<T> {
    pub t: Vec<T>,
    pub omega: Vec<T>,
}

impl<T: Real> RescaledProfile<T> {
    pub fn spacing(&self) -> T {
        self.t[1] - self.t[0]
    }

    /// `∫ ω² t^k dt` by Simpson with a Richardson correction.
    pub fn moment(&self, k: usize) -> T {
        let h = self.spacing();
        let third = lit::<T>(1.0 / 3.0);
        let four = lit::<T>(4.0);
        let two = lit::<T>(2.0);
        let y: Vec<T> = self
            .t
            .iter()
            .zip(&self.omega)
            .map(|(&t, &w)| w * w * t.powi(k as i32))
            .collect();
        let mut total = T::zero();
        for c in (0..y.len() - 1).step_by(4) {
            let fine = h * third * (y[c] + four * y[c + 1] + two * y[c + 2] + four * y[c + 3] + y[c + 4]);
            let coarse = two * h * third * (y[c] + four * y[c + 2] + y[c + 4]);
            total = total + fine + (fine - coarse) / lit(15.0);
        }
        total
    }

    /// `sup |ω − W|` over the sampled window.
    pub fn distance_to(&self, w: &SolitonW<T>) -> T {
        self.t
            .iter()
            .zip(&self.omega)
            .map(|(&t, &o)| (o - w.value(t)).abs())
            .fold(T::zero(), T::max)
    }

    pub fn argmax(&self) -> T {
        let (i, _) = self.omega.iter().enumerate().fold(
            (0, T::neg_infinity()),
            |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc },
        );
        self.t[i]
    }
}

/// Samples `ω` on `[−min(√λ(r̄ − R), 40), 40]`.
pub fn rescaled_profile<T: Real>(sol: &RadialSolution<T>) -> RescaledProfile<T> {
    rescaled_profile_with(sol, OMEGA_SAMPLES)
}

pub fn rescaled_profile_with<T: Real>(sol: &RadialSolution<T>, samples: usize) -> RescaledProfile<T> {
    assert!(
        samples >= 5 && (samples - 1).is_multiple_of(4),
        "sample count must be 4m + 1"
    );
    let params = &sol.params;
    let sqrt_l = params.lambda.sqrt();
    let amp = params.amplitude_scale();
    let width = lit::<T>(OMEGA_HALF_WIDTH);
    let lo = -(sqrt_l * (sol.r_bar - params.inner_radius)).min(width);
    let hi = width;
    let h = (hi - lo) / from_usize(samples - 1);
    let mut t = Vec::with_capacity(samples);
    let mut omega = Vec::with_capacity(samples);
    for i in 0..samples {
        let ti = if i == samples - 1 { hi } else { lo + h * from_usize(i) };
        // At t = 0 this reproduces u_max exactly rather than the interpolant.
        let value = if ti == T::zero() {
            sol.u_max
        } else {
            sol.u(ti / sqrt_l + sol.r_bar)
        };
        t.push(ti);
        omega.push(value / amp);
    }
    RescaledProfile { t, omega }
}

/// The even decaying solution of `−W'' + W = W^{p−1}` on the line,
/// `W(r) = (p/2)^{1/(p−2)} sech^{2/(p−2)}((p−2) r / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonW<T> {
    pub p: T,
}

impl<T: Real> SolitonW<T> {
    pub fn new(p: T) -> Result<Self> {
        if !(p > lit(2.0)) || !p.is_finite() {
            return Err(Error::BadExponent {
                p: to_f64(p),
                two_star: f64::INFINITY,
            });
        }
        Ok(Self { p })
    }

    fn beta(&self) -> T {
        lit::<T>(2.0) / (self.p - lit(2.0))
    }

    fn rate(&self) -> T {
        (self.p - lit(2.0)) * lit(0.5)
    }

    pub fn peak(&self) -> T {
        (self.p * lit(0.5)).powf(T::one() / (self.p - lit(2.0)))
    }

    pub fn value(&self, r: T) -> T {
        self.peak() * sech(self.rate() * r).powf(self.beta())
    }

    /// `W' = −β b tanh(b r) W` with `β b = 1`.
    pub fn derivative(&self, r: T) -> T {
        -(self.rate() * r).tanh() * self.value(r)
    }

    /// `W'' = (tanh²(b r) − b sech²(b r)) W`.
    pub fn second_derivative(&self, r: T) -> T {
        let x = self.rate() * r;
        let th = x.tanh();
        let sh = sech(x);
        (th * th - self.rate() * sh * sh) * self.value(r)
    }

    /// Pointwise `−W'' + W − W^{p−1}`.
    pub fn residual(&self, r: T) -> T {
        let w = self.value(r);
        -self.second_derivative(r) + w - w.powf(self.p - T::one())
    }

    /// `½(W')² + W^p/p − W²/2`, zero along the homoclinic orbit.
    pub fn energy(&self, r: T) -> T {
        let w = self.value(r);
        let dw = self.derivative(r);
        lit::<T>(0.5) * dw * dw + w.powf(self.p) / self.p - lit::<T>(0.5) * w * w
    }

    /// `∫ W² r^k dr` by adaptive quadrature over `[−L, L]`.
    pub fn moment_numeric(&self, k: usize, tol: T) -> T {
        // W² ~ e^{-2|r|}; L = 40 leaves e^{-80} times a power of L.
        let l = lit::<T>(40.0);
        let f = |r: T| {
            let w = self.value(r);
            w * w * r.powi(k as i32)
        };
        adaptive_simpson(&f, -l, T::zero(), tol, 60) + adaptive_simpson(&f, T::zero(), l, tol, 60)
    }
}

/// `∫_ℝ W² dr = (p/2)^{2/(p−2)} · (2/(p−2)) · √π Γ(β)/Γ(β + ½)`, `β = 2/(p−2)`.
pub fn soliton_mass_1d<T: Real>(p: T) -> Result<T> {
    let w = SolitonW::new(p)?;
    let beta = w.beta();
    Ok(w.peak() * w.peak() / w.rate() * T::PI().sqrt() * gamma(beta) / gamma(beta + lit(0.5)))
}

/// Same quantity by adaptive quadrature.
pub fn soliton_mass_1d_numeric<T: Real>(p: T) -> Result<T> {
    Ok(SolitonW::new(p)?.moment_numeric(0, lit(1e-15)))
}

/// Individual terms of the binomial mass expansion in powers of `λ^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassExpansion<T> {
    /// `|S| C(N−1,k) λ^{2/(p−2) − (k+1)/2} r̄^{N−1−k} ∫ω² t^k`, for `k = 0..N−1`.
    pub terms: Vec<T>,
    pub total: T,
    pub mass: T,
    pub deviation: T,
}

pub fn mass_expansion<T: Real>(sol: &RadialSolution<T>) -> Result<MassExpansion<T>> {
    let params = &sol.params;
    let profile = rescaled_profile(sol);
    let area = surface_area::<T>(params.n)?;
    let two = lit::<T>(2.0);
    let nm1 = params.n - 1;
    let terms: Vec<T> = (0..=nm1)
        .map(|k| {
            let expo = two / (params.p - two) - from_usize::<T>(k + 1) * lit(0.5);
            area * binomial::<T>(nm1, k)
                * params.lambda.powf(expo)
                * sol.r_bar.powi((nm1 - k) as i32)
                * profile.moment(k)
        })
        .collect();
    let total = terms.iter().fold(T::zero(), |a, &b| a + b);
    let d = mass(sol)?.value;
    let deviation = if d == T::zero() {
        total.abs()
    } else {
        ((total - d) / d).abs()
    };
    Ok(MassExpansion {
        terms,
        total,
        mass: d,
        deviation,
    })
}

/// Relative deviation between the binomial expansion and the direct mass.
pub fn mass_expansion_check<T: Real>(sol: &RadialSolution<T>) -> Result<T> {
    mass_expansion(sol).map(|m| m.deviation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemParams;
    use crate::solution::{SolverStats, TailData};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// `u = e^{-(r-1)}` sampled on `[1, r_end]` with a pure exponential tail.
    fn manufactured(r_end: f64, cells: usize) -> RadialSolution<f64> {
        let params = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        let n = 4 * cells + 1;
        let grid = (0..n)
            .map(|i| {
                let r = 1.0 + (r_end - 1.0) * i as f64 / (n - 1) as f64;
                GridPoint {
                    r,
                    u: (-(r - 1.0)).exp(),
                    v: -(-(r - 1.0)).exp(),
                }
            })
            .collect();
        let tail = TailData {
            r_match: r_end,
            u_match: (-(r_end - 1.0)).exp(),
            decay_rate: 1.0,
            power: 0.0,
        };
        RadialSolution::from_samples(params, 1.0, grid, tail, SolverStats::default())
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(surface_area::<f64>(2).unwrap(), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(surface_area::<f64>(3).unwrap(), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(surface_area::<f64>(4).unwrap(), 2.0 * PI * PI, max_relative = 1e-15);
        assert!(matches!(surface_area::<f64>(1), Err(Error::BadDimension(1))));
    }

    #[test]
    fn manufactured_mass() {
        let sol = manufactured(15.0, 400);
        let d = mass(&sol).unwrap();
        assert_relative_eq!(d.value, 5.0 * PI, max_relative = 1e-10);
        assert!(d.tail_fraction < 1e-9 && d.estimated_error >= 0.0);
        // Short grid: the tail carries most of the integral yet stays exact.
        let short = manufactured(3.0, 100);
        let all = radial_moment(&short, Density::Square, 2.0).unwrap();
        assert_relative_eq!(all.value, 5.0 * PI, max_relative = 1e-10);
        assert!(matches!(mass(&short), Err(Error::TailDominates { .. })));
    }

    #[test]
    fn zero_profile() {
        let params = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        let grid = (0..9)
            .map(|i| GridPoint {
                r: 1.0 + i as f64,
                u: 0.0,
                v: 0.0,
            })
            .collect();
        let tail = TailData::for_params(&params, 9.0, 0.0);
        let sol = RadialSolution::from_samples(params, 0.0, grid, tail, SolverStats::default());
        assert_eq!(mass(&sol).unwrap().value, 0.0);
        assert_eq!(action(&sol).unwrap(), 0.0);
        assert!(nehari_residual(&sol).unwrap().is_nan());
    }

    #[test]
    fn soliton_is_a_solution() {
        for &p in &[2.5, 3.0, 4.0, 6.0, 9.0] {
            let w = SolitonW::<f64>::new(p).unwrap();
            for i in 0..=400 {
                let r = -20.0 + 0.1 * i as f64;
                assert!(w.residual(r).abs() < 1e-10, "p={p} r={r}");
                assert!(w.energy(r).abs() < 1e-10, "p={p} r={r}");
                assert_eq!(w.value(r), w.value(-r));
                assert!(w.value(r) <= w.value(0.0));
            }
            // Second derivative against a central difference.
            let h = 1e-4;
            let fd: f64 = (w.value(0.7 + h) - 2.0 * w.value(0.7) + w.value(0.7 - h)) / (h * h);
            assert!((fd - w.second_derivative(0.7)).abs() < 1e-6);
        }
    }

    #[test]
    fn soliton_mass_closed_form_and_quadrature_agree() {
        assert_relative_eq!(soliton_mass_1d(4.0).unwrap(), 4.0, max_relative = 1e-13);
        for &p in &[3.0_f64, 4.0, 6.0, 2.5, 7.5] {
            let closed = soliton_mass_1d(p).unwrap();
            let numeric = soliton_mass_1d_numeric(p).unwrap();
            assert!(
                ((closed - numeric) / closed).abs() < 1e-10,
                "p={p}: {closed} vs {numeric}"
            );
        }
        assert!(soliton_mass_1d(2.0_f64).is_err());
    }
}
