//! Problem instances of `-Δu + λu = u^(p-1)` on `{|x| > R}` and their
//! classification by the existence regime of the mass constraint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Tolerance used when comparing an exponent with a regime boundary
/// (`p = 4`, `p = 6`, `p = 2 + 4/N`).
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// One validated instance: dimension, exponent, spectral parameter and the
/// radius of the excluded ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams<T> {
    pub n: usize,
    pub p: T,
    pub lambda: T,
    pub inner_radius: T,
}

impl<T: Real> ProblemParams<T> {
    /// Validates `(N, p, λ, R)`.
    pub fn new(n: usize, p: T, lambda: T, inner_radius: T) -> Result<Self> {
        validate(n, p, lambda, inner_radius)
    }

    /// `N - 1` as a scalar; the coefficient of the first-order radial term.
    pub fn damping(&self) -> T {
        from_usize::<T>(self.n) - T::one()
    }

    /// Natural amplitude scale `λ^{1/(p-2)}`.
    pub fn amplitude_scale(&self) -> T {
        self.lambda.powf(T::one() / (self.p - lit(2.0)))
    }

    /// Natural length scale `λ^{-1/2}`.
    pub fn length_scale(&self) -> T {
        self.lambda.sqrt().recip()
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        validate(self.n, self.p, lambda, self.inner_radius)
    }

    pub fn with_radius(&self, inner_radius: T) -> Result<Self> {
        validate(self.n, self.p, self.lambda, inner_radius)
    }

    pub fn regime(&self) -> Regime {
        classify_valid(self.n, self.p)
    }
}

/// The five existence regimes for normalized solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `N >= 3, 2 + 4/N <= p < 2*`, or `N = 2, 4 < p < 6`.
    MassSuperOrCritical,
    /// `N = 2, p = 6`.
    TwoDP6,
    /// `N = 2, p > 6`.
    TwoDPGt6,
    /// `N = 2, p = 4`.
    TwoDP4,
    /// `2 < p < 2 + 4/N` (any N).
    MassSubcritical,
}

impl Regime {
    pub fn case_label(self) -> &'static str {
        match self {
            Regime::MassSuperOrCritical => "i",
            Regime::TwoDP6 => "ii",
            Regime::TwoDPGt6 => "iii",
            Regime::TwoDP4 => "iv",
            Regime::MassSubcritical => "v",
        }
    }
}

/// Returns `(p_c, 2*)` with `p_c = 2 + 4/N` and `2* = 2N/(N-2)`, or `+∞`
/// when `N = 2`.
pub fn critical_exponents<T: Real>(n: usize) -> Result<(T, T)> {
    if n < 2 {
        return Err(Error::BadDimension(n));
    }
    let nf: T = from_usize(n);
    let p_c = lit::<T>(2.0) + lit::<T>(4.0) / nf;
    let two_star = if n == 2 {
        T::infinity()
    } else {
        lit::<T>(2.0) * nf / (nf - lit(2.0))
    };
    Ok((p_c, two_star))
}

pub fn validate<T: Real>(n: usize, p: T, lambda: T, inner_radius: T) -> Result<ProblemParams<T>> {
    let (_, two_star) = critical_exponents::<T>(n)?;
    if !(p > lit(2.0) && p < two_star) {
        return Err(Error::BadExponent {
            p: to_f64(p),
            two_star: to_f64(two_star),
        });
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::BadLambda(to_f64(lambda)));
    }
    if !(inner_radius > T::zero()) || !inner_radius.is_finite() {
        return Err(Error::BadRadius(to_f64(inner_radius)));
    }
    Ok(ProblemParams {
        n,
        p,
        lambda,
        inner_radius,
    })
}

/// Classifies a valid `(N, p)` into its regime.
pub fn classify_regime<T: Real>(n: usize, p: T) -> Result<Regime> {
    validate(n, p, T::one(), T::one())?;
    Ok(classify_valid(n, p))
}

fn classify_valid<T: Real>(n: usize, p: T) -> Regime {
    let tol = lit::<T>(REGIME_TOLERANCE);
    let near = |a: T, b: T| (a - b).abs() <= tol * b.abs().max(T::one());
    let p_c = lit::<T>(2.0) + lit::<T>(4.0) / from_usize::<T>(n);
    if n == 2 {
        if near(p, lit(4.0)) {
            Regime::TwoDP4
        } else if near(p, lit(6.0)) {
            Regime::TwoDP6
        } else if p > lit(6.0) {
            Regime::TwoDPGt6
        } else if p > lit(4.0) {
            Regime::MassSuperOrCritical
        } else {
            Regime::MassSubcritical
        }
    } else if near(p, p_c) || p > p_c {
        Regime::MassSuperOrCritical
    } else {
        Regime::MassSubcritical
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_accepts_and_rejects() {
        let ok = validate(3, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(ok.n, 3);
        assert!(matches!(validate(3, 6.0, 1.0, 1.0), Err(Error::BadExponent { .. })));
        assert!(validate(2, 50.0, 1.0, 1.0).is_ok());
        assert!(matches!(validate(1, 3.0, 1.0, 1.0), Err(Error::BadDimension(1))));
        assert!(matches!(validate(3, 2.0, 1.0, 1.0), Err(Error::BadExponent { .. })));
        assert!(matches!(validate(3, 4.0, 0.0, 1.0), Err(Error::BadLambda(_))));
        assert!(matches!(validate(3, 4.0, 1.0, -1.0), Err(Error::BadRadius(_))));
        assert!(matches!(
            validate(3, f64::NAN, 1.0, 1.0),
            Err(Error::BadExponent { .. })
        ));
    }

    #[test]
    fn regimes_follow_the_case_split() {
        assert_eq!(classify_regime(3, 10.0 / 3.0).unwrap(), Regime::MassSuperOrCritical);
        assert_eq!(classify_regime(2, 6.0).unwrap(), Regime::TwoDP6);
        assert_eq!(classify_regime(2, 3.0).unwrap(), Regime::MassSubcritical);
        assert_eq!(classify_regime(2, 7.0).unwrap(), Regime::TwoDPGt6);
        assert_eq!(classify_regime(2, 4.0).unwrap(), Regime::TwoDP4);
        assert_eq!(classify_regime(2, 5.0).unwrap(), Regime::MassSuperOrCritical);
        assert_eq!(classify_regime(3, 3.0).unwrap(), Regime::MassSubcritical);
        assert_eq!(classify_regime(4, 3.0).unwrap(), Regime::MassSuperOrCritical);
        // 2 + 4/3 computed in floating point still lands on the critical case.
        assert_eq!(
            classify_regime(3, 2.0 + 4.0 / 3.0).unwrap(),
            Regime::MassSuperOrCritical
        );
        assert!(classify_regime(3, 7.0).is_err());
    }

    #[test]
    fn critical_exponent_table() {
        let (pc, ts) = critical_exponents::<f64>(2).unwrap();
        assert_eq!(pc, 4.0);
        assert!(ts.is_infinite());
        let (pc, ts) = critical_exponents::<f64>(3).unwrap();
        assert!((pc - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(ts, 6.0);
        assert_eq!(critical_exponents::<f64>(4).unwrap(), (3.0, 4.0));
        assert!(critical_exponents::<f64>(1).is_err());
        let (pc, ts) = critical_exponents::<f32>(3).unwrap();
        assert!((pc - 10.0 / 3.0).abs() < 1e-6 && ts == 6.0);
    }

    proptest! {
        #[test]
        fn critical_below_sobolev(n in 3usize..40) {
            let (pc, ts) = critical_exponents::<f64>(n).unwrap();
            prop_assert!(pc < ts);
        }

        #[test]
        fn classification_is_total(n in 2usize..8, frac in 0.001f64..0.999) {
            let (_, ts) = critical_exponents::<f64>(n).unwrap();
            let upper = if ts.is_finite() { ts } else { 20.0 };
            let p = 2.0 + frac * (upper - 2.0);
            let regime = classify_regime(n, p).unwrap();
            let pc = 2.0 + 4.0 / n as f64;
            match regime {
                Regime::MassSubcritical => prop_assert!(p < pc),
                Regime::MassSuperOrCritical => prop_assert!(p >= pc - 1e-12),
                Regime::TwoDP6 | Regime::TwoDPGt6 | Regime::TwoDP4 => prop_assert_eq!(n, 2),
            }
        }
    }
}
