use crate::numerics::SolverReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is identically zero")]
    ZeroMatrix,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("problem is infeasible")]
    Infeasible(Box<SolverReport>),
    #[error("iteration limit reached after {} iterations", .0.iterations)]
    IterLimit(Box<SolverReport>),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("too few antennas: N = {n} must exceed {required}")]
    TooFewAntennas { n: usize, required: f64 },
    #[error("asymptotic MMF forms require equal SINR targets")]
    UnequalTargets,
    #[error("no randomization candidate admits a feasible power scaling ({draws} draws)")]
    RandomizationFailed { draws: usize },
    #[error("initial point violates constraint {index} (slack {violation:e})")]
    InfeasibleStart { index: usize, violation: f64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the error kinds that mean "this target cannot be met", as
    /// opposed to a solver malfunction.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::RandomizationFailed { .. }
        )
    }
}
