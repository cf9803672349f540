//! Integral identities and inequalities evaluated as residuals.
//!
//! With `A = ∫(u')²`, `B = ∫u²`, `C = ∫|u|^p` and their `1/|x|`-weighted
//! counterparts `A₁, B₁, C₁`, testing the equation against `x·∇u` and
//! `(x/|x|)·∇u` on `{|x| > R}` gives
//!
//! ```text
//! (N−2)/2·A + Nλ/2·B − N/p·C                 = ½|S^{N−1}| s² R^N
//! (N−1)/2·A₁ + (N−1)λ/2·B₁ − (N−1)/p·C₁      = ½|S^{N−1}| s² R^{N−1}
//! ```
//!
//! where `s = u'(R)`. The radial reduction of `|x·∇u|²/|x|³` is `(u')²/r`,
//! so the full identity (first minus second) reads
//!
//! ```text
//! (N−2)/2·A − (N+1)/2·A₁ + A₁ + Nλ/2·B − (N−1)λ/2·B₁ − N/p·C + (N−1)/p·C₁
//!     = ½|S^{N−1}| s² (R^N − R^{N−1}).
//! ```

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::profile::{action_from, nehari_from, rescaled_profile, surface_area, Moments, SolitonW};
use crate::scalar::{from_usize, lit, Real};
use crate::solution::RadialSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport<T> {
    pub nehari_res: T,
    pub pohozaev_full_res: T,
    /// Residual of the `x·∇u` identity.
    pub boundary_res_a18: T,
    /// Residual of the `(x/|x|)·∇u` identity.
    pub boundary_res_a20: T,
    /// Slack of `(N−2−ε)A + (N−ε)λB ≤ (2N/p)C` at `ε = 0.1`.
    pub inequality_b9_slack: T,
    pub action: T,
    /// `sup |ω − W|` on the rescaled window.
    pub profile_distance: T,
}

/// Relative residual `|Σ terms − rhs| / max(|terms|, |rhs|)`; zero when
/// every term vanishes.
fn normalized<T: Real>(terms: &[T], rhs: T) -> T {
    let scale = terms.iter().fold(rhs.abs(), |m, t| m.max(t.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    let lhs = terms.iter().fold(T::zero(), |a, &b| a + b);
    (lhs - rhs).abs() / scale
}

/// `½|S^{N−1}| s² R^k`.
fn boundary_term<T: Real>(sol: &RadialSolution<T>, k: usize) -> Result<T> {
    let area = surface_area::<T>(sol.params.n)?;
    Ok(lit::<T>(0.5) * area * sol.slope * sol.slope * sol.params.inner_radius.powi(k as i32))
}

struct Terms<T> {
    a18: Vec<T>,
    a20: Vec<T>,
    rhs18: T,
    rhs20: T,
}

fn terms<T: Real>(sol: &RadialSolution<T>, m: &Moments<T>) -> Result<Terms<T>> {
    let n = sol.params.n;
    let nf: T = from_usize(n);
    let p = sol.params.p;
    let lambda = sol.params.lambda;
    let half = lit::<T>(0.5);
    let a18 = vec![
        (nf - lit(2.0)) * half * m.grad.value,
        nf * lambda * half * m.mass.value,
        -nf / p * m.power.value,
    ];
    let nm1 = nf - T::one();
    let a20 = vec![
        nm1 * half * m.grad_weighted.value,
        nm1 * lambda * half * m.mass_weighted.value,
        -nm1 / p * m.power_weighted.value,
    ];
    Ok(Terms {
        a18,
        a20,
        rhs18: boundary_term(sol, n)?,
        rhs20: boundary_term(sol, n - 1)?,
    })
}

fn full_residual_from<T: Real>(t: &Terms<T>) -> T {
    let mut all = t.a18.clone();
    all.extend(t.a20.iter().map(|&x| -x));
    normalized(&all, t.rhs18 - t.rhs20)
}

/// Relative residual of the full identity.
pub fn pohozaev_full_residual<T: Real>(sol: &RadialSolution<T>) -> Result<T> {
    let m = Moments::compute(sol)?;
    Ok(full_residual_from(&terms(sol, &m)?))
}

/// Residuals of the two boundary identities.
pub fn boundary_identity_residuals<T: Real>(sol: &RadialSolution<T>) -> Result<(T, T)> {
    let m = Moments::compute(sol)?;
    let t = terms(sol, &m)?;
    Ok((normalized(&t.a18, t.rhs18), normalized(&t.a20, t.rhs20)))
}

/// Right-hand sides of the two boundary identities; they coincide at `R = 1`.
pub fn boundary_rhs<T: Real>(sol: &RadialSolution<T>) -> Result<(T, T)> {
    Ok((boundary_term(sol, sol.params.n)?, boundary_term(sol, sol.params.n - 1)?))
}

/// `(2N/p)C − (N−2−ε)A − (N−ε)λB`; positive when the inequality holds.
pub fn supercritical_inequality_slack<T: Real>(sol: &RadialSolution<T>, eps: T) -> Result<T> {
    let m = Moments::compute(sol)?;
    Ok(slack_from(sol, &m, eps))
}

fn slack_from<T: Real>(sol: &RadialSolution<T>, m: &Moments<T>, eps: T) -> T {
    let nf: T = from_usize(sol.params.n);
    let two = lit::<T>(2.0);
    two * nf / sol.params.p * m.power.value
        - (nf - two - eps) * m.grad.value
        - (nf - eps) * sol.params.lambda * m.mass.value
}

/// `(N−2)A + NλB − (2N/p)C`, divided by the largest of the three terms.
/// Nonnegative for every solution since it equals `|S^{N−1}| s² R^N`.
pub fn reversed_inequality_slack<T: Real>(sol: &RadialSolution<T>) -> Result<T> {
    let m = Moments::compute(sol)?;
    let nf: T = from_usize(sol.params.n);
    let two = lit::<T>(2.0);
    let t = [
        (nf - two) * m.grad.value,
        nf * sol.params.lambda * m.mass.value,
        two * nf / sol.params.p * m.power.value,
    ];
    let scale = t.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok((t[0] + t[1] - t[2]) / scale)
}

/// `(∫u²/|x|) / ∫u²` and `(∫(u')²/|x|) / ∫(u')²`.
pub fn concentration_ratios<T: Real>(sol: &RadialSolution<T>) -> Result<(T, T)> {
    let m = Moments::compute(sol)?;
    Ok((
        m.mass_weighted.value / m.mass.value,
        m.grad_weighted.value / m.grad.value,
    ))
}

/// Default `ε` used for the inequality slack in [`DiagnosticsReport`].
pub const REPORT_EPS: f64 = 0.1;

pub fn diagnostics<T: Real>(sol: &RadialSolution<T>) -> Result<DiagnosticsReport<T>> {
    let m = Moments::compute(sol)?;
    let t = terms(sol, &m)?;
    let lambda = sol.params.lambda;
    let profile_distance = rescaled_profile(sol).distance_to(&SolitonW::new(sol.params.p)?);
    Ok(DiagnosticsReport {
        nehari_res: nehari_from(&m, lambda),
        pohozaev_full_res: full_residual_from(&t),
        boundary_res_a18: normalized(&t.a18, t.rhs18),
        boundary_res_a20: normalized(&t.a20, t.rhs20),
        inequality_b9_slack: slack_from(sol, &m, lit(REPORT_EPS)),
        action: action_from(&m, lambda, sol.params.p),
        profile_distance,
    })
}

/// Only the two cheap gates used during continuation.
pub fn gate_residuals<T: Real>(sol: &RadialSolution<T>) -> Result<(T, T, T)> {
    let m = Moments::compute(sol)?;
    let t = terms(sol, &m)?;
    Ok((
        nehari_from(&m, sol.params.lambda),
        full_residual_from(&t),
        action_from(&m, sol.params.lambda, sol.params.p),
    ))
}
