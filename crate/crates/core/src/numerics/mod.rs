//! Linear algebra and the two generic convex solvers used by every
//! higher-level module.

pub mod lift;
pub mod linalg;
pub mod qcqp;
pub mod report;
pub mod sdp;

pub use linalg::{hermitian_solve, orthonormal_range, HermitianFactor, IdentityPlusLowRank};
pub use qcqp::{solve_convex_qcqp, ConvexQcqp, QcqpOptions, QuadConstraint, Quadratic};
pub use report::{SolverReport, SolverStatus};
pub use sdp::{solve_sdp, BlockCoef, SdpConstraint, SdpOptions, SdpProblem, SdpSolution};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

/// Default relative rank threshold for [`orthonormal_range`].
pub const RANK_TOL: f64 = 1e-10;
