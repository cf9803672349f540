//! Sampled radial profiles with an analytic far-field tail.

use serde::{Deserialize, Serialize};

use crate::problem::ProblemParams;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<T> {
    pub r: T,
    pub u: T,
    pub v: T,
}

/// Far field `u(r) = u_match · e^{-k (r - r_match)} · (r_match / r)^m` with
/// `k = √λ` and `m = (N-1)/2`, attached beyond the last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailData<T> {
    pub r_match: T,
    pub u_match: T,
    pub decay_rate: T,
    pub power: T,
}

impl<T: Real> TailData<T> {
    pub fn for_params(params: &ProblemParams<T>, r_match: T, u_match: T) -> Self {
        Self {
            r_match,
            u_match,
            decay_rate: params.lambda.sqrt(),
            power: params.damping() * lit(0.5),
        }
    }

    pub fn u(&self, r: T) -> T {
        self.u_match * (-self.decay_rate * (r - self.r_match)).exp() * (self.r_match / r).powf(self.power)
    }

    pub fn v(&self, r: T) -> T {
        -(self.decay_rate + self.power / r) * self.u(r)
    }

    /// Amplitude `A` of `A e^{-√λ r} r^{-(N-1)/2}`. May overflow for very
    /// large `√λ r_match` in single precision.
    pub fn amplitude(&self) -> T {
        self.u_match * (self.decay_rate * self.r_match).exp() * self.r_match.powf(self.power)
    }
}

/// Counters reported by the solver that produced a solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub integrations: usize,
    pub bracket_expansions: usize,
    pub bisections: usize,
    /// Final relative bracket width on the boundary slope (shooting), or the
    /// final residual norm (finite differences).
    pub final_width: f64,
    pub method: String,
}

/// A computed radial profile on `[R, ∞)`.
///
/// `grid` holds `4m + 1` samples grouped into `m` cells of four equal
/// sub-intervals each; cells may differ in width. Beyond the last sample the
/// analytic tail takes over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution<T> {
    pub params: ProblemParams<T>,
    pub slope: T,
    pub grid: Vec<GridPoint<T>>,
    pub r_bar: T,
    pub u_max: T,
    pub tail: TailData<T>,
    pub stats: SolverStats,
}

impl<T: Real> RadialSolution<T> {
    /// Builds a solution from samples. The grid length must be `4m + 1`;
    /// `r̄` and `u_max` are taken from the largest sample, refined by a
    /// parabola through its neighbours.
    pub fn from_samples(
        params: ProblemParams<T>,
        slope: T,
        grid: Vec<GridPoint<T>>,
        tail: TailData<T>,
        stats: SolverStats,
    ) -> Self {
        assert!(
            grid.len() >= 5 && (grid.len() - 1).is_multiple_of(4),
            "grid must hold 4m + 1 samples"
        );
        let (r_bar, u_max) = discrete_peak(&grid);
        Self {
            params,
            slope,
            grid,
            r_bar,
            u_max,
            tail,
            stats,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = &[GridPoint<T>]> {
        (0..(self.grid.len() - 1) / 4).map(move |c| &self.grid[4 * c..4 * c + 5])
    }

    pub fn r_end(&self) -> T {
        self.grid.last().map(|g| g.r).unwrap_or(self.params.inner_radius)
    }

    pub fn tail_coefficient(&self) -> T {
        self.tail.amplitude()
    }

    /// `(u, u')` at `r`: zero inside the ball, cubic Hermite on the grid,
    /// analytic beyond it.
    pub fn eval(&self, r: T) -> (T, T) {
        let first = self.grid[0];
        if r < first.r {
            return (T::zero(), T::zero());
        }
        let last = self.grid[self.grid.len() - 1];
        if r >= last.r {
            if self.tail.u_match == T::zero() {
                return (T::zero(), T::zero());
            }
            return (self.tail.u(r), self.tail.v(r));
        }
        let idx = self.grid.partition_point(|g| g.r <= r).max(1) - 1;
        hermite(&self.grid[idx], &self.grid[idx + 1], r)
    }

    pub fn u(&self, r: T) -> T {
        self.eval(r).0
    }

    /// Checks the shape expected of a ground state: `u(R) = 0`, `u > 0` in
    /// the interior, a single sign change of `u'`, and `λ < u_max^{p-2}`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let first = self.grid[0];
        let scale = self.u_max.abs().max(T::min_positive_value());
        if first.u.abs() > lit::<T>(1e-12) * scale {
            return Err(format!("u(R) = {} is not zero", first.u));
        }
        // A truncated profile (zero tail) may end on an outer Dirichlet node.
        let interior_end = if self.tail.u_match == T::zero() {
            self.grid.len() - 1
        } else {
            self.grid.len()
        };
        if let Some(g) = self.grid[1..interior_end].iter().find(|g| !(g.u > T::zero())) {
            return Err(format!("u = {} is not positive at r = {}", g.u, g.r));
        }
        let changes = self
            .grid
            .windows(2)
            .filter(|w| (w[0].v > T::zero()) != (w[1].v > T::zero()))
            .count();
        if changes != 1 {
            return Err(format!("u' changes sign {changes} times"));
        }
        if !(self.params.lambda < self.u_max.powf(self.params.p - lit(2.0))) {
            return Err(format!(
                "lambda = {} is not below u_max^(p-2) = {}",
                self.params.lambda,
                self.u_max.powf(self.params.p - lit(2.0))
            ));
        }
        Ok(())
    }
}

fn hermite<T: Real>(a: &GridPoint<T>, b: &GridPoint<T>, r: T) -> (T, T) {
    let h = b.r - a.r;
    let t = (r - a.r) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    let u = h00 * a.u + h10 * h * a.v + h01 * b.u + h11 * h * b.v;
    let six = lit::<T>(6.0);
    let d00 = six * t2 - six * t;
    let d10 = three * t2 - lit::<T>(4.0) * t + T::one();
    let d01 = -six * t2 + six * t;
    let d11 = three * t2 - two * t;
    let v = (d00 * a.u + d01 * b.u) / h + d10 * a.v + d11 * b.v;
    (u, v)
}

fn discrete_peak<T: Real>(grid: &[GridPoint<T>]) -> (T, T) {
    let (i, best) = grid
        .iter()
        .enumerate()
        .fold((0, grid[0]), |acc, (i, g)| if g.u > acc.1.u { (i, *g) } else { acc });
    if i == 0 || i + 1 >= grid.len() {
        return (best.r, best.u);
    }
    // Root of the Hermite derivative between the neighbours bracketing v = 0.
    let (a, b) = if grid[i].v > T::zero() {
        (grid[i], grid[i + 1])
    } else {
        (grid[i - 1], grid[i])
    };
    if !(a.v > T::zero() && b.v <= T::zero()) {
        return (best.r, best.u);
    }
    let (mut lo, mut hi) = (a.r, b.r);
    for _ in 0..100 {
        let mid = (lo + hi) * lit(0.5);
        if hermite(&a, &b, mid).1 > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = (lo + hi) * lit(0.5);
    (r, hermite(&a, &b, r).0.max(best.u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_is_exact_for_cubics() {
        let f = |r: f64| (r * r * r - 2.0 * r + 1.0, 3.0 * r * r - 2.0);
        let a = GridPoint {
            r: 0.5,
            u: f(0.5).0,
            v: f(0.5).1,
        };
        let b = GridPoint {
            r: 1.7,
            u: f(1.7).0,
            v: f(1.7).1,
        };
        for i in 0..=10 {
            let r = 0.5 + 1.2 * i as f64 / 10.0;
            let (u, v) = hermite(&a, &b, r);
            assert!((u - f(r).0).abs() < 1e-12);
            assert!((v - f(r).1).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_is_continuous_with_its_match_point() {
        let params = ProblemParams::<f64>::new(3, 4.0, 2.0, 1.0).unwrap();
        let tail = TailData::for_params(&params, 10.0, 1e-6);
        assert!((tail.u(10.0) - 1e-6).abs() < 1e-20);
        let h = 1e-6;
        let fd = (tail.u(10.0 + h) - tail.u(10.0 - h)) / (2.0 * h);
        assert!((fd - tail.v(10.0)).abs() < 1e-12);
    }
}
