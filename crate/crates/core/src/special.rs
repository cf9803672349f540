//! Special functions and small quadrature helpers.

use crate::scalar::{from_usize, lit, Real};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos approximation, reflection for `x < 1/2`).
pub fn gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + lit::<T>(*c) / (x + from_usize(i));
    }
    let t = x + lit::<T>(LANCZOS_G) + half;
    (T::PI() + T::PI()).sqrt() * t.powf(x + half) * (-t).exp() * acc
}

/// `Γ(n/2)` for a positive integer `n`, by exact recursion from `Γ(1)` or
/// `Γ(1/2)`.
pub fn gamma_half_integer<T: Real>(n: usize) -> T {
    assert!(n > 0, "gamma_half_integer needs n > 0");
    let (mut value, mut arg) = if n.is_multiple_of(2) {
        (T::one(), T::one())
    } else {
        (T::PI().sqrt(), lit::<T>(0.5))
    };
    let target: T = from_usize::<T>(n) * lit(0.5);
    while arg < target {
        value = value * arg;
        arg = arg + T::one();
    }
    value
}

/// Scaled upper incomplete gamma `e^x Γ(a, x)` for real `a` and `x > 0`.
///
/// Modified Lentz evaluation of the continued fraction; it converges for any
/// real `a`, quickly once `x > a + 1`. For `a > 0` and small `x` the series
/// for the lower function is used instead.
pub fn upper_gamma_scaled<T: Real>(a: T, x: T) -> T {
    assert!(x > T::zero(), "upper_gamma_scaled needs x > 0");
    let eps = T::epsilon();
    if a > T::zero() && x < a + T::one() {
        // e^x (Γ(a) - γ(a, x)), γ by its power series.
        let mut term = T::one() / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap = ap + T::one();
            term = term * x / ap;
            sum = sum + term;
            if term.abs() < sum.abs() * eps {
                break;
            }
        }
        let lower_scaled = sum * x.powf(a); // e^x γ(a, x)
        return gamma(a) * x.exp() - lower_scaled;
    }
    let tiny = T::min_positive_value() / eps;
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..200_000usize {
        let fi: T = from_usize(i);
        let an = -fi * (fi - a);
        b = b + lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() <= eps {
            break;
        }
    }
    x.powf(a) * h
}

pub fn sech<T: Real>(x: T) -> T {
    // cosh overflows before sech underflows; guard so far tails give 0.
    let ax = x.abs();
    if ax > lit(700.0) {
        return T::zero();
    }
    T::one() / ax.cosh()
}

pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * from_usize::<T>(n - i) / from_usize::<T>(i + 1);
    }
    acc
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, max_depth: usize) -> T {
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * lit(0.5);
    let fm = f(m);
    let whole = (b - a) / lit(6.0) * (fa + lit::<T>(4.0) * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: usize) -> T {
    let m = (a + b) * lit(0.5);
    let lm = (a + m) * lit(0.5);
    let rm = (m + b) * lit(0.5);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / lit(6.0) * (fa + lit::<T>(4.0) * flm + fm);
    let right = (b - m) / lit(6.0) * (fm + lit::<T>(4.0) * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= lit::<T>(15.0) * tol {
        return left + right + delta / lit(15.0);
    }
    let half = tol * lit(0.5);
    simpson_step(f, a, m, fa, flm, fm, left, half, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, half, depth - 1)
}
