use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    IterLimit,
    NumericalFailure,
}

/// Diagnostics attached to every iterative solve.
///
/// `trajectory` holds the objective after each outer iteration (centering
/// step, SCA step, fixed-point sweep residual, ...), `dual_trajectory` the
/// matching dual objective where one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    pub gap: f64,
    pub residual: f64,
    pub objective: f64,
    pub trajectory: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dual_trajectory: Vec<f64>,
    pub wall_ms: f64,
}

impl SolverReport {
    pub fn new(status: SolverStatus) -> Self {
        Self {
            status,
            iterations: 0,
            gap: 0.0,
            residual: 0.0,
            objective: f64::NAN,
            trajectory: Vec::new(),
            dual_trajectory: Vec::new(),
            wall_ms: 0.0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
