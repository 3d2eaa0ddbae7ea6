use std::fmt;

use thiserror::Error;

/// Two edges of one location whose guards overlap on the same symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminismViolation {
    pub location: String,
    pub symbol: Vec<String>,
    pub edges: (usize, usize),
}

impl fmt::Display for DeterminismViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "location {} on symbol {{{}}}: edges {} and {} overlap",
            self.location,
            self.symbol.join(","),
            self.edges.0,
            self.edges.1
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("automaton is not deterministic: {}", join_violations(.0))]
    Nondeterministic(Vec<DeterminismViolation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[DeterminismViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// True for errors caused by malformed or inconsistent input models.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_) | Error::Nondeterministic(_) | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
