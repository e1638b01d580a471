//! Experiment runner for the `mcbf-core` solvers: method dispatch, Monte
//! Carlo sweeps with CSV output, JSON result files and the invariant suite.

pub mod methods;
pub mod output;
pub mod sweep;
pub mod validate;
