use std::fmt;

/// Failure categories, each with its own process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<exterior_gs::Error> for CliError {
    fn from(e: exterior_gs::Error) -> Self {
        use exterior_gs::Error as E;
        let msg = format!("{e:?}: {e}");
        match e {
            E::BadDimension(_)
            | E::BadExponent { .. }
            | E::BadLambda(_)
            | E::BadRadius(_)
            | E::InvalidSlope(_)
            | E::ParamMismatch(_)
            | E::InvalidArgument(_) => CliError::Validation(msg),
            _ => CliError::Solver(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
