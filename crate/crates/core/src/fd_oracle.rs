//! Independent check solver: central differences on a uniform grid with
//! Dirichlet conditions at both ends, solved by damped Newton iteration.
//!
//! Nothing here goes through the ODE integrator, so agreement with the
//! shooter is meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemParams;
use crate::profile::{mass, SolitonW};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::solution::{GridPoint, RadialSolution, SolverStats, TailData};

/// Default node count (a multiple of four plus one).
pub const DEFAULT_NODES: usize = 4001;
pub const MIN_NODES: usize = 200;
/// Outer boundary sits this many decay lengths past the estimated maximum.
pub const OUTER_DECAY_LENGTHS: f64 = 28.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdGrid<T> {
    pub r_nodes: Vec<T>,
}

impl<T: Real> FdGrid<T> {
    /// `n` uniform nodes on `[R, R_out]`, `n = 4m + 1 ≥ 200`.
    pub fn uniform(inner: T, outer: T, n: usize) -> Result<Self> {
        if n < MIN_NODES || !(n - 1).is_multiple_of(4) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference grid needs 4m + 1 >= {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(outer > inner) {
            return Err(Error::InvalidArgument(
                "outer radius must exceed the inner radius".into(),
            ));
        }
        let h = (outer - inner) / from_usize(n - 1);
        let r_nodes = (0..n)
            .map(|i| if i == n - 1 { outer } else { inner + h * from_usize(i) })
            .collect();
        Ok(Self { r_nodes })
    }

    /// Grid sized for `params` with outer radius `r̄_est + 28/√λ`.
    pub fn for_params(params: &ProblemParams<T>, n: usize) -> Result<Self> {
        let outer = estimated_peak(params) + lit::<T>(OUTER_DECAY_LENGTHS) * params.length_scale();
        Self::uniform(params.inner_radius, outer, n)
    }

    pub fn n(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn spacing(&self) -> T {
        self.r_nodes[1] - self.r_nodes[0]
    }

    /// Same interval with twice as many sub-intervals.
    pub fn refined(&self) -> Result<Self> {
        Self::uniform(self.r_nodes[0], self.r_nodes[self.n() - 1], 2 * (self.n() - 1) + 1)
    }
}

fn estimated_peak<T: Real>(params: &ProblemParams<T>) -> T {
    params.inner_radius + params.length_scale()
}

/// `λ^{1/(p−2)} W(√λ(r − r̄_est))`, damped to zero at the inner radius.
pub fn soliton_ansatz<T: Real>(params: &ProblemParams<T>, grid: &FdGrid<T>) -> Result<Vec<T>> {
    let w = SolitonW::new(params.p)?;
    let k = params.lambda.sqrt();
    let peak = estimated_peak(params);
    let amp = params.amplitude_scale();
    let two = lit::<T>(2.0);
    let last = grid.n() - 1;
    Ok(grid
        .r_nodes
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == 0 || i == last {
                T::zero()
            } else {
                amp * w.value(k * (r - peak)) * (two * k * (r - params.inner_radius)).tanh()
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig<T> {
    /// Converged when `‖F‖_∞ < tol · λ^{(p−1)/(p−2)}`.
    pub tol: T,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            tol: lit(1e-10),
            max_iterations: 100,
            max_halvings: 40,
        }
    }
}

fn residual<T: Real>(params: &ProblemParams<T>, r: &[T], u: &[T], h: T, out: &mut [T]) -> T {
    let n = u.len();
    let inv_h2 = (h * h).recip();
    let inv_2h = (h + h).recip();
    let damping = params.damping();
    let pm2 = params.p - lit(2.0);
    let mut norm = T::zero();
    out[0] = T::zero();
    out[n - 1] = T::zero();
    for i in 1..n - 1 {
        let f = (u[i + 1] - u[i] - u[i] + u[i - 1]) * inv_h2 + damping / r[i] * (u[i + 1] - u[i - 1]) * inv_2h
            - params.lambda * u[i]
            + u[i].abs().powf(pm2) * u[i];
        out[i] = f;
        norm = norm.max(f.abs());
    }
    norm
}

/// Solves the tridiagonal system `J δ = rhs` in place (Thomas algorithm).
fn thomas<T: Real>(sub: &[T], diag: &mut [T], sup: &[T], rhs: &mut [T]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1] == T::zero() {
            return Err(Error::NewtonDiverged { trivial: false });
        }
        let w = sub[i] / diag[i - 1];
        diag[i] = diag[i] - w * sup[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    rhs[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Damped Newton from `init`; returns the converged profile.
pub fn fd_solve<T: Real>(params: &ProblemParams<T>, grid: &FdGrid<T>, init: &[T]) -> Result<RadialSolution<T>> {
    fd_solve_with(params, grid, init, &NewtonConfig::default())
}

pub fn fd_solve_with<T: Real>(
    params: &ProblemParams<T>,
    grid: &FdGrid<T>,
    init: &[T],
    config: &NewtonConfig<T>,
) -> Result<RadialSolution<T>> {
    let n = grid.n();
    if init.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial guess has {} values for {} nodes",
            init.len(),
            n
        )));
    }
    let r = &grid.r_nodes;
    let h = grid.spacing();
    let two = lit::<T>(2.0);
    let scale = params.lambda.powf((params.p - T::one()) / (params.p - two));
    let tol = config.tol * scale;
    let inv_h2 = (h * h).recip();
    let inv_2h = (h + h).recip();
    let damping = params.damping();
    let pm2 = params.p - two;
    let pm1 = params.p - T::one();

    let mut u: Vec<T> = init.to_vec();
    u[0] = T::zero();
    u[n - 1] = T::zero();
    let mut f = vec![T::zero(); n];
    let mut trial_f = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut sub = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut sup = vec![T::zero(); n];
    let mut step = vec![T::zero(); n];
    let mut norm = residual(params, r, &u, h, &mut f);
    let mut iterations = 0;

    while norm >= tol {
        if iterations >= config.max_iterations {
            return Err(Error::NewtonDiverged { trivial: false });
        }
        iterations += 1;
        // Dirichlet rows are identity rows with zero right-hand side.
        diag[0] = T::one();
        sup[0] = T::zero();
        diag[n - 1] = T::one();
        sub[n - 1] = T::zero();
        step[0] = T::zero();
        step[n - 1] = T::zero();
        for i in 1..n - 1 {
            let c = damping / r[i] * inv_2h;
            sub[i] = inv_h2 - c;
            sup[i] = inv_h2 + c;
            diag[i] = -two * inv_h2 - params.lambda + pm1 * u[i].abs().powf(pm2);
            step[i] = -f[i];
        }
        thomas(&sub, &mut diag, &sup, &mut step)?;

        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            for i in 0..n {
                trial[i] = (u[i] + alpha * step[i]).max(T::zero());
            }
            let trial_norm = residual(params, r, &trial, h, &mut trial_f);
            if trial_norm.is_finite() && trial_norm < (T::one() - lit::<T>(1e-4) * alpha) * norm {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut f, &mut trial_f);
                norm = trial_norm;
                accepted = true;
                break;
            }
            alpha = alpha * lit(0.5);
        }
        if !accepted {
            return Err(Error::NewtonDiverged { trivial: false });
        }
    }

    let u_peak = u.iter().fold(T::zero(), |m, &x| m.max(x));
    if u_peak <= lit::<T>(1e-6) * params.amplitude_scale() {
        return Err(Error::NewtonDiverged { trivial: true });
    }
    if u[1..n - 1].iter().any(|&x| !(x > T::zero())) {
        return Err(Error::NegativeSolution);
    }

    // Second-order one-sided differences at the ends, central inside.
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    let grid_points: Vec<GridPoint<T>> = (0..n)
        .map(|i| {
            let v = if i == 0 {
                (-three * u[0] + four * u[1] - u[2]) * inv_2h
            } else if i == n - 1 {
                (three * u[n - 1] - four * u[n - 2] + u[n - 3]) * inv_2h
            } else {
                (u[i + 1] - u[i - 1]) * inv_2h
            };
            GridPoint { r: r[i], u: u[i], v }
        })
        .collect();
    let slope = grid_points[0].v;
    let tail = TailData::for_params(params, r[n - 1], T::zero());
    let stats = SolverStats {
        integrations: 0,
        bracket_expansions: 0,
        bisections: iterations,
        final_width: to_f64(norm),
        method: "finite-difference".into(),
    };
    Ok(RadialSolution::from_samples(*params, slope, grid_points, tail, stats))
}

/// Solves on the default grid from the soliton ansatz.
pub fn fd_solve_default<T: Real>(params: &ProblemParams<T>) -> Result<RadialSolution<T>> {
    solve_on(params, &FdGrid::for_params(params, DEFAULT_NODES)?)
}

fn solve_on<T: Real>(params: &ProblemParams<T>, grid: &FdGrid<T>) -> Result<RadialSolution<T>> {
    let init = soliton_ansatz(params, grid)?;
    match fd_solve(params, grid, &init) {
        // A sign-changing or collapsed iterate: retry once from a taller guess.
        Err(Error::NegativeSolution) | Err(Error::NewtonDiverged { trivial: true }) => {
            let taller: Vec<T> = init.iter().map(|&x| x * lit(1.5)).collect();
            fd_solve(params, grid, &taller)
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonStudy<T> {
    pub nodes: [usize; 3],
    pub masses: [T; 3],
    /// `(d_h − d_{h/2}) / (d_{h/2} − d_{h/4})`, about 4 for a second-order scheme.
    pub ratio: T,
}

/// Mass on `n`, `2n−1` and `4n−3` nodes over the same interval.
pub fn richardson_study<T: Real>(params: &ProblemParams<T>, n: usize) -> Result<RichardsonStudy<T>> {
    let g1 = FdGrid::for_params(params, n)?;
    let g2 = g1.refined()?;
    let g3 = g2.refined()?;
    let m1 = mass(&solve_on(params, &g1)?)?.value;
    let m2 = mass(&solve_on(params, &g2)?)?.value;
    let m3 = mass(&solve_on(params, &g3)?)?.value;
    Ok(RichardsonStudy {
        nodes: [g1.n(), g2.n(), g3.n()],
        masses: [m1, m2, m3],
        ratio: (m1 - m2) / (m2 - m3),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub rel_linf: T,
    pub rel_l2: T,
    pub rel_mass_gap: T,
}

/// Number of common sample points used by [`compare`].
pub const COMPARE_SAMPLES: usize = 8001;

fn same_params<T: Real>(a: &ProblemParams<T>, b: &ProblemParams<T>) -> bool {
    let close = |x: T, y: T| (x - y).abs() <= lit::<T>(1e-12) * x.abs().max(y.abs());
    a.n == b.n && close(a.p, b.p) && close(a.lambda, b.lambda) && close(a.inner_radius, b.inner_radius)
}

/// Discrepancies between two solutions of the same problem, sampled on a
/// common uniform grid covering the longer of the two.
pub fn compare<T: Real>(a: &RadialSolution<T>, b: &RadialSolution<T>) -> Result<Comparison<T>> {
    if !same_params(&a.params, &b.params) {
        return Err(Error::ParamMismatch(format!("{:?} vs {:?}", a.params, b.params)));
    }
    let lo = a.params.inner_radius;
    let hi = a.r_end().max(b.r_end());
    let m = COMPARE_SAMPLES - 1;
    let h = (hi - lo) / from_usize(m);
    let q = a.params.damping();
    let mut sup_diff = T::zero();
    let mut sup_a = T::zero();
    let mut l2_diff = T::zero();
    let mut l2_a = T::zero();
    for i in 0..=m {
        let r = lo + h * from_usize(i);
        let ua = a.u(r);
        let ub = b.u(r);
        let d = (ua - ub).abs();
        let w = r.powf(q) * if i == 0 || i == m { lit(0.5) } else { T::one() };
        sup_diff = sup_diff.max(d);
        sup_a = sup_a.max(ua.abs());
        l2_diff = l2_diff + w * d * d;
        l2_a = l2_a + w * ua * ua;
    }
    let ratio = |num: T, den: T| if num == T::zero() { T::zero() } else { num / den };
    let ma = mass(a)?.value;
    let mb = mass(b)?.value;
    Ok(Comparison {
        rel_linf: ratio(sup_diff, sup_a),
        rel_l2: ratio(l2_diff.sqrt(), l2_a.sqrt()),
        rel_mass_gap: ratio((ma - mb).abs(), ma.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams<f64> {
        ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_shape_is_validated() {
        assert!(FdGrid::<f64>::uniform(1.0, 2.0, 101).is_err());
        assert!(FdGrid::<f64>::uniform(1.0, 2.0, 202).is_err());
        assert!(FdGrid::<f64>::uniform(2.0, 1.0, 201).is_err());
        let g = FdGrid::for_params(&params(), 201).unwrap();
        assert_eq!(g.n(), 201);
        assert_eq!(g.refined().unwrap().n(), 401);
        // e^{-√λ(R_out − r̄_est)} below 1e-12
        assert!((-(g.r_nodes[200] - 2.0)).exp() < 1e-12);
    }

    #[test]
    fn thomas_solves_a_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] → x = 1
        let sub = [0.0, 1.0, 1.0];
        let mut diag = [2.0, 3.0, 2.0];
        let sup = [1.0, 1.0, 0.0];
        let mut rhs = [3.0, 5.0, 3.0];
        thomas(&sub, &mut diag, &sup, &mut rhs).unwrap();
        for x in rhs {
            assert!((x - 1.0_f64).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_guess_is_flagged_trivial() {
        let p = params();
        let g = FdGrid::for_params(&p, 401).unwrap();
        let zero = vec![0.0; g.n()];
        assert!(matches!(
            fd_solve(&p, &g, &zero),
            Err(Error::NewtonDiverged { trivial: true })
        ));
    }

    #[test]
    fn converges_from_the_ansatz() {
        let p = params();
        let sol = fd_solve_default(&p).unwrap();
        sol.check_invariants().unwrap();
        let same = compare(&sol, &sol).unwrap();
        assert_eq!((same.rel_linf, same.rel_l2, same.rel_mass_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn compare_rejects_different_problems() {
        let p = params();
        let a = fd_solve(
            &p,
            &FdGrid::for_params(&p, 401).unwrap(),
            &soliton_ansatz(&p, &FdGrid::for_params(&p, 401).unwrap()).unwrap(),
        )
        .unwrap();
        let q = p.with_lambda(2.0).unwrap();
        let gq = FdGrid::for_params(&q, 401).unwrap();
        let b = fd_solve(&q, &gq, &soliton_ansatz(&q, &gq).unwrap()).unwrap();
        assert!(matches!(compare(&a, &b), Err(Error::ParamMismatch(_))));
    }
}
