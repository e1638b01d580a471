//! Multi-group multicast transmit beamforming.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense complex linear algebra, a log-barrier convex QCQP
//!   solver and a small dense primal-dual SDP solver.
//! * [`scenario`]: system configuration, seeded channel generation and the
//!   JSON scenario format.
//! * [`qos`]: SINR/power evaluation, the weighted covariance `R(λ)` and the
//!   structured beamformer `w_i = R⁻¹(λ) H_i a_i` with its verification
//!   predicates.
//! * [`lambda`]: the multiplier fixed point and its large-antenna closed forms.
//! * [`weights`]: the reduced weight problem and its SDR / SCA solvers, plus
//!   the end-to-end QoS pipelines.
//! * [`direct`]: full-dimension SDR and SCA baselines.
//! * [`mmf`]: max-min-fair beamforming by QoS inversion and its asymptotic
//!   variants.

pub mod direct;
pub mod error;
pub mod lambda;
pub mod mmf;
pub mod numerics;
pub mod qos;
pub mod scenario;
pub mod weights;

pub use error::{Error, Result};
pub use numerics::{CMat, CVec, SolverReport, SolverStatus, C64};
