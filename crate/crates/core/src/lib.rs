//! Ground states of `−Δu + λu = u^{p−1}` on the exterior of a ball in `ℝ^N`,
//! their mass curves, existence thresholds and stability labels.
//!
//! All numerics are generic over a [`scalar::Real`] type; the aliases below
//! fix it to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod error;
pub mod fd_oracle;
pub mod pohozaev;
pub mod problem;
pub mod profile;
pub mod radial_ode;
pub mod scalar;
pub mod shooter;
pub mod solution;
pub mod special;

pub use error::{Error, Result};
pub use problem::Regime;

pub type ProblemParams = problem::ProblemParams<f64>;
pub type RadialSolution = solution::RadialSolution<f64>;
pub type IntegratorConfig = radial_ode::IntegratorConfig<f64>;
pub type ShooterConfig = shooter::ShooterConfig<f64>;
pub type CurveConfig = curve::CurveConfig<f64>;
pub type CurvePoint = curve::CurvePoint<f64>;
pub type MassCurve = curve::MassCurve<f64>;
pub type ThresholdReport = curve::ThresholdReport<f64>;
pub type DiagnosticsReport = pohozaev::DiagnosticsReport<f64>;
pub type QuadratureResult = profile::QuadratureResult<f64>;
pub type SolitonW = profile::SolitonW<f64>;
pub type Comparison = fd_oracle::Comparison<f64>;
