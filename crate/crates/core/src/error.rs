use thiserror::Error;

/// Failures raised anywhere in the library.
///
/// Numeric payloads are stored as `f64` so the error type stays independent
/// of the scalar type the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension N = {0} is not supported (need N >= 2)")]
    BadDimension(usize),
    #[error("exponent p = {p} outside the admissible range 2 < p < {two_star}")]
    BadExponent { p: f64, two_star: f64 },
    #[error("spectral parameter lambda = {0} must be positive")]
    BadLambda(f64),
    #[error("inner radius R = {0} must be positive")]
    BadRadius(f64),

    #[error("step size underflow at r = {r}")]
    StepSizeUnderflow { r: f64 },
    #[error("integration exceeded {max_steps} steps (reached r = {r})")]
    MaxStepsExceeded { max_steps: usize, r: f64 },

    #[error("boundary slope s = {0} must be positive")]
    InvalidSlope(f64),
    #[error("shot with slope s = {s} reached r_max = {r_max} without a decision; increase r_max")]
    UndecidedShot { s: f64, r_max: f64 },
    #[error("no sign-changing bracket for the boundary slope: {0}")]
    NoBracket(String),
    #[error("bisection did not reach the requested width within {0} iterations")]
    MaxIterations(usize),
    #[error("integration too stiff: {0}")]
    StiffFailure(String),

    #[error("analytic tail carries {fraction} of the integral; r_max too small")]
    TailDominates { fraction: f64 },

    #[error("mass curve has no interior minimum bracket")]
    NoInteriorMinimum,
    #[error("solve failed at lambda = {lambda}: {message}")]
    SolveFailed { lambda: f64, message: String },

    #[error("Newton iteration diverged{}", if *trivial { " (collapsed to the trivial solution)" } else { "" })]
    NewtonDiverged { trivial: bool },
    #[error("finite-difference iterate converged to a sign-changing state")]
    NegativeSolution,
    #[error("solutions belong to different problems: {0}")]
    ParamMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
