//! The reduced weight problem and its SDR and SCA solvers.
//!
//! With `λ` fixed every candidate beamformer is `w_i = G_i b_i` for a known
//! `N × r_i` matrix `G_i`, so the QoS problem becomes
//!
//! ```text
//! minimize    Σ_i b_iᴴ (G_iᴴG_i) b_i
//! subject to  |b_iᴴ f_iik|² / γ_ik − Σ_{j≠i} |b_jᴴ f_jik|² ≥ σ²,   f_jik = G_jᴴ h_ik
//! ```
//!
//! For the structured methods `G_i = R⁻¹(λ) H_i` (or `R⁻¹(λ) U_i` with an
//! orthonormal basis `U_i` of the columns of `H_i`), so the problem size is
//! `Σ r_i ≤ K_tot` whatever `N` is. The direct baselines reuse the same
//! machinery with `G_i = I_N` or an orthonormal basis of all channels.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lambda::{asymptotic_lambda_common, fixed_point_lambda, LambdaOptions};
use crate::numerics::lift::{lift_hermitian, lift_rank_one, lift_vec, unlift_vec};
use crate::numerics::linalg::{hermitian_eigen, orthonormal_range, HermitianFactor, IdentityPlusLowRank};
use crate::numerics::report::elapsed_ms;
use crate::numerics::{
    solve_convex_qcqp, solve_sdp, BlockCoef, CMat, ConvexQcqp, CVec, QcqpOptions, QuadConstraint,
    Quadratic, SdpConstraint, SdpOptions, SdpProblem, SolverReport, SolverStatus, C64, RANK_TOL,
};
use crate::qos::{
    assemble_beamformer, covariance_operator, normalize_phase, total_power, Basis, BeamformerSet,
    DualMultipliers, GroupWeights, StructuredSolution, SINR_SLACK,
};
use crate::scenario::{ChannelRng, ChannelSet, SystemConfig};

/// How reduced coordinates `b_i` relate to the group weights `a_i`.
#[derive(Debug, Clone)]
enum Coordinates {
    /// `b_i = a_i`.
    Weights,
    /// `H_i a_i = U_i b_i`.
    Basis(Vec<CMat>),
    /// `b_i` parameterizes `w_i` directly.
    Beamformer,
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// `G_i`, `N × r_i`.
    pub gmat: Vec<CMat>,
    /// `G_iᴴ G_i`.
    pub gram: Vec<CMat>,
    /// `f[j][i][k] = G_jᴴ h_ik`.
    pub f: Vec<Vec<Vec<CVec>>>,
    pub gamma: Vec<Vec<f64>>,
    pub sigma2: f64,
    coords: Coordinates,
    h: Vec<CMat>,
}

impl ReducedProblem {
    fn from_gmat(gmat: Vec<CMat>, ch: &ChannelSet, gamma: &[Vec<f64>], sigma2: f64, coords: Coordinates) -> Self {
        let gram = gmat.iter().map(|g| g.adjoint() * g).collect();
        let f = gmat
            .iter()
            .map(|g| {
                ch.h.iter()
                    .map(|h| {
                        let c = g.adjoint() * h;
                        c.column_iter().map(|col| col.into_owned()).collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            gmat,
            gram,
            f,
            gamma: gamma.to_vec(),
            sigma2,
            coords,
            h: ch.h.clone(),
        }
    }

    pub fn groups(&self) -> usize {
        self.gmat.len()
    }

    /// Same problem with different SINR targets.
    pub fn with_gamma(&self, gamma: &[Vec<f64>]) -> Self {
        Self {
            gamma: gamma.to_vec(),
            ..self.clone()
        }
    }

    /// Reduced dimensions `r_i`.
    pub fn dims(&self) -> Vec<usize> {
        self.gmat.iter().map(|g| g.ncols()).collect()
    }

    /// `U_i` when basis reduction is active.
    pub fn basis(&self) -> Option<&[CMat]> {
        match &self.coords {
            Coordinates::Basis(u) => Some(u),
            _ => None,
        }
    }

    /// `w_i = G_i b_i`.
    pub fn beamformers(&self, b: &[CVec]) -> BeamformerSet {
        BeamformerSet {
            w: self.gmat.iter().zip(b).map(|(g, b)| g * b).collect(),
        }
    }

    /// Group weights `a_i` for coordinates `b_i`.
    pub fn to_weights(&self, b: &[CVec]) -> Result<Vec<CVec>> {
        match &self.coords {
            Coordinates::Weights => Ok(b.to_vec()),
            Coordinates::Basis(u) => u
                .iter()
                .zip(&self.h)
                .zip(b)
                .map(|((u, h), b)| {
                    // Least squares: (HᴴH) a = Hᴴ U b.
                    let f = HermitianFactor::new(&(h.adjoint() * h))?;
                    Ok(f.solve_vec(&(h.adjoint() * (u * b))))
                })
                .collect(),
            Coordinates::Beamformer => Err(Error::InvalidProblem(
                "direct coordinates have no group weights".into(),
            )),
        }
    }

    /// Coordinates of given weights.
    pub fn from_weights(&self, a: &[CVec]) -> Result<Vec<CVec>> {
        match &self.coords {
            Coordinates::Weights => Ok(a.to_vec()),
            Coordinates::Basis(u) => Ok(u
                .iter()
                .zip(&self.h)
                .zip(a)
                .map(|((u, h), a)| u.adjoint() * (h * a))
                .collect()),
            Coordinates::Beamformer => Err(Error::InvalidProblem(
                "direct coordinates have no group weights".into(),
            )),
        }
    }

    /// `Σ_i b_iᴴ G_iᴴG_i b_i`.
    pub fn objective(&self, b: &[CVec]) -> f64 {
        self.gram
            .iter()
            .zip(b)
            .map(|(g, b)| (b.adjoint() * g * b)[(0, 0)].re)
            .sum()
    }

    /// `|b_jᴴ f_jik|²`, indexed `[i][k][j]`.
    fn gains(&self, b: &[CVec]) -> Vec<Vec<Vec<f64>>> {
        let g = self.groups();
        (0..g)
            .map(|i| {
                (0..self.gamma[i].len())
                    .map(|k| (0..g).map(|j| b[j].dotc(&self.f[j][i][k]).norm_sqr()).collect())
                    .collect()
            })
            .collect()
    }

    /// SINR of every user evaluated through the reduced data.
    pub fn sinr(&self, b: &[CVec]) -> Vec<Vec<f64>> {
        self.gains(b)
            .into_iter()
            .enumerate()
            .map(|(i, users)| {
                users
                    .into_iter()
                    .map(|gk| {
                        let interference: f64 =
                            gk.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
                        gk[i] / (interference + self.sigma2)
                    })
                    .collect()
            })
            .collect()
    }

    fn min_ratio(&self, b: &[CVec]) -> (f64, usize) {
        let mut worst = (f64::INFINITY, 0);
        let mut idx = 0;
        for (i, users) in self.sinr(b).iter().enumerate() {
            for (k, s) in users.iter().enumerate() {
                let r = s / self.gamma[i][k];
                if r < worst.0 {
                    worst = (r, idx);
                }
                idx += 1;
            }
        }
        worst
    }
}

/// Build the structured problem for multipliers `λ`: `G_i = R⁻¹(λ) H_i`, or
/// `R⁻¹(λ) U_i` when `use_basis_reduction` is set.
pub fn build_reduced_problem(
    ch: &ChannelSet,
    lambda: &DualMultipliers,
    gamma: &[Vec<f64>],
    sigma2: f64,
    use_basis_reduction: bool,
) -> Result<ReducedProblem> {
    let r = covariance_operator(lambda, ch, gamma, None)?;
    build_reduced_problem_with(ch, &r, gamma, sigma2, use_basis_reduction)
}

/// [`build_reduced_problem`] for an arbitrary covariance `R = I + H D Hᴴ`.
pub fn build_reduced_problem_with(
    ch: &ChannelSet,
    r: &IdentityPlusLowRank,
    gamma: &[Vec<f64>],
    sigma2: f64,
    use_basis_reduction: bool,
) -> Result<ReducedProblem> {
    if r.dim() != ch.n() {
        return Err(Error::DimensionMismatch("covariance does not match N".into()));
    }
    if use_basis_reduction {
        let mut us = Vec::with_capacity(ch.groups());
        let mut gmat = Vec::with_capacity(ch.groups());
        for h in &ch.h {
            let (u, _) = orthonormal_range(h, RANK_TOL)?;
            gmat.push(r.solve(&u));
            us.push(u);
        }
        Ok(ReducedProblem::from_gmat(gmat, ch, gamma, sigma2, Coordinates::Basis(us)))
    } else {
        let gmat = ch.h.iter().map(|h| r.solve(h)).collect();
        Ok(ReducedProblem::from_gmat(gmat, ch, gamma, sigma2, Coordinates::Weights))
    }
}

/// Search space of the direct baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectBasis {
    /// `w_i ∈ C^N`.
    Full,
    /// `w_i` restricted to the span of all user channels. Exact for the QoS
    /// problem: components orthogonal to every channel add power and nothing
    /// else.
    ChannelSpan,
}

/// Direct-parameterization problem with `G_i = I_N` or `G_i = U` (an
/// orthonormal basis of all channels).
pub fn build_direct_problem(
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
    sigma2: f64,
    basis: DirectBasis,
) -> Result<ReducedProblem> {
    let g = match basis {
        DirectBasis::Full => CMat::identity(ch.n(), ch.n()),
        DirectBasis::ChannelSpan => orthonormal_range(&ch.stacked(), RANK_TOL)?.0,
    };
    Ok(ReducedProblem::from_gmat(
        vec![g; ch.groups()],
        ch,
        gamma,
        sigma2,
        Coordinates::Beamformer,
    ))
}

/// Relaxed problem: one PSD block `X_i` per group.
pub fn relaxation(rp: &ReducedProblem) -> SdpProblem {
    let g = rp.groups();
    let mut constraints = Vec::new();
    for i in 0..g {
        for (k, &gamma) in rp.gamma[i].iter().enumerate() {
            let mut terms = Vec::with_capacity(g);
            for j in 0..g {
                let coef = if j == i { 1.0 / gamma } else { -1.0 };
                terms.push((j, BlockCoef::LowRank(vec![(coef, rp.f[j][i][k].clone())])));
            }
            constraints.push(SdpConstraint {
                terms,
                rhs: rp.sigma2,
            });
        }
    }
    SdpProblem {
        block_sizes: rp.dims(),
        objective: rp.gram.clone(),
        constraints,
    }
}

#[derive(Debug, Clone)]
pub struct SdrOutcome {
    /// Best extracted coordinates `b_i`.
    pub coords: Vec<CVec>,
    /// Certified lower bound on the reduced problem (dual objective).
    pub lower_bound: f64,
    /// Objective of the extracted point.
    pub objective: f64,
    pub x: Vec<CMat>,
    pub rank_one: bool,
    pub report: SolverReport,
}

/// Relax, solve, and extract a feasible point by Gaussian randomization with
/// per-group power rescaling.
pub fn solve_weights_sdr(rp: &ReducedProblem, n_rand: usize, seed: u64) -> Result<SdrOutcome> {
    solve_weights_sdr_with(rp, n_rand, seed, SdpOptions::default())
}

pub fn solve_weights_sdr_with(
    rp: &ReducedProblem,
    n_rand: usize,
    seed: u64,
    opts: SdpOptions,
) -> Result<SdrOutcome> {
    let sdp = solve_sdp(&relaxation(rp), opts)?;
    if let Some(bound) = sdp.bound_exceeded {
        let mut rep = sdp.report;
        rep.status = SolverStatus::Infeasible;
        rep.objective = bound;
        return Err(Error::Infeasible(Box::new(rep)));
    }
    let (coords, objective, rank_one) = randomize_and_scale(&sdp.x, rp, n_rand, seed)?;
    let mut report = sdp.report;
    report.objective = objective;
    Ok(SdrOutcome {
        coords,
        lower_bound: sdp.dual_objective,
        objective,
        x: sdp.x,
        rank_one,
        report,
    })
}

/// Ratio `λ₂/λ₁` below which a block counts as rank one.
pub const RANK_ONE_RATIO: f64 = 1e-7;

/// Extract coordinates from relaxed blocks.
///
/// Candidates are the principal eigenvectors and `n_rand` draws
/// `b_i ~ CN(0, X_i)`; each is rescaled per group by [`min_power_scaling`] and
/// the cheapest feasible candidate wins. Randomization is skipped when every
/// block is rank one. Returns the coordinates, their objective and whether the
/// rank-one shortcut was taken.
pub fn randomize_and_scale(
    x: &[CMat],
    rp: &ReducedProblem,
    n_rand: usize,
    seed: u64,
) -> Result<(Vec<CVec>, f64, bool)> {
    let eig: Vec<_> = x.iter().map(hermitian_eigen).collect();
    let rank_one = eig
        .iter()
        .all(|(v, _)| v.len() < 2 || v[1].max(0.0) <= RANK_ONE_RATIO * v[0]);
    let principal: Vec<CVec> = eig
        .iter()
        .map(|(v, u)| u.column(0) * C64::new(v[0].max(0.0).sqrt(), 0.0))
        .collect();
    let mut best: Option<(Vec<CVec>, f64)> = None;
    let mut consider = |cand: Vec<CVec>| {
        if let Some((scaled, obj)) = scale_candidate(rp, &cand) {
            if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                best = Some((scaled, obj));
            }
        }
    };
    consider(principal);
    if !rank_one {
        let roots: Vec<CMat> = eig
            .iter()
            .map(|(v, u)| {
                let mut r = u.clone();
                for (c, val) in v.iter().enumerate() {
                    r.column_mut(c).scale_mut(val.max(0.0).sqrt());
                }
                r
            })
            .collect();
        let mut rng = ChannelRng::new(seed);
        for _ in 0..n_rand {
            let cand = roots
                .iter()
                .map(|r| {
                    let xi = CVec::from_fn(r.ncols(), |_, _| rng.complex_gaussian());
                    r * xi
                })
                .collect();
            consider(cand);
        }
    }
    match best {
        Some((b, obj)) => Ok((b, obj, rank_one)),
        None => Err(Error::RandomizationFailed {
            draws: if rank_one { 1 } else { n_rand + 1 },
        }),
    }
}

fn scale_candidate(rp: &ReducedProblem, cand: &[CVec]) -> Option<(Vec<CVec>, f64)> {
    let gains = rp.gains(cand);
    let p = min_power_scaling(&gains, &rp.gamma, rp.sigma2)?;
    let scaled: Vec<CVec> = cand
        .iter()
        .zip(&p)
        .map(|(b, &pi)| b * C64::new(pi.sqrt(), 0.0))
        .collect();
    let obj = rp.objective(&scaled);
    Some((scaled, obj))
}

/// Smallest group power scalars `p ≥ 0` with
/// `p_i g[i][k][i] ≥ γ_ik (Σ_{j≠i} p_j g[i][k][j] + σ²)` for all users.
///
/// The constraint map is monotone, so the componentwise-minimal solution also
/// minimizes every positive combination of the `p_i`. It is found by policy
/// iteration over the binding user of each group: each step solves a `G × G`
/// linear system and the iterates increase monotonically. A system without a
/// nonnegative solution certifies infeasibility. Returns `None` when
/// infeasible.
pub fn min_power_scaling(gains: &[Vec<Vec<f64>>], gamma: &[Vec<f64>], sigma2: f64) -> Option<Vec<f64>> {
    let g = gains.len();
    for (i, users) in gains.iter().enumerate() {
        if users.iter().any(|gk| !(gk[i] > 0.0) || gk.iter().any(|v| !v.is_finite())) {
            return None;
        }
    }
    // Requirement of user (i, k) given p.
    let need = |p: &[f64], i: usize, k: usize| -> f64 {
        let gk = &gains[i][k];
        let interference: f64 = (0..g).filter(|&j| j != i).map(|j| p[j] * gk[j]).sum();
        gamma[i][k] * (interference + sigma2) / gk[i]
    };
    let argmax = |p: &[f64], i: usize| -> usize {
        (0..gains[i].len())
            .max_by(|&a, &b| need(p, i, a).total_cmp(&need(p, i, b)))
            .expect("groups are nonempty")
    };
    let zero = vec![0.0; g];
    let mut policy: Vec<usize> = (0..g).map(|i| argmax(&zero, i)).collect();
    let mut p = vec![0.0; g];
    for _ in 0..(4 * gains.iter().map(|u| u.len()).sum::<usize>() + 10) {
        let mut m = DMatrix::<f64>::identity(g, g);
        let mut c = DVector::<f64>::zeros(g);
        for i in 0..g {
            let k = policy[i];
            let gk = &gains[i][k];
            for j in 0..g {
                if j != i {
                    m[(i, j)] = -gamma[i][k] * gk[j] / gk[i];
                }
            }
            c[i] = gamma[i][k] * sigma2 / gk[i];
        }
        let sol = m.lu().solve(&c)?;
        if sol.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return None;
        }
        p = sol.iter().copied().collect();
        let next: Vec<usize> = (0..g)
            .map(|i| {
                let k = argmax(&p, i);
                // Keep the current choice on ties to guarantee termination.
                if need(&p, i, k) <= need(&p, i, policy[i]) * (1.0 + 1e-12) {
                    policy[i]
                } else {
                    k
                }
            })
            .collect();
        if next == policy {
            break;
        }
        policy = next;
    }
    let ok = (0..g).all(|i| (0..gains[i].len()).all(|k| need(&p, i, k) <= p[i] * (1.0 + 1e-9)));
    ok.then_some(p)
}

#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the objective is at most this value.
    pub target: Option<f64>,
    pub qcqp: QcqpOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            target: None,
            qcqp: QcqpOptions::default(),
        }
    }
}

/// Convex inner approximation of the reduced problem around `v`: each SINR
/// constraint's concave part is replaced by its tangent at `v`.
pub fn sca_subproblem(rp: &ReducedProblem, v: &[CVec]) -> ConvexQcqp {
    let dims = rp.dims();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &r| {
            let o = *acc;
            *acc += 2 * r;
            Some(o)
        })
        .collect();
    let n: usize = dims.iter().map(|r| 2 * r).sum();
    let mut q0 = DMatrix::zeros(n, n);
    for (i, gram) in rp.gram.iter().enumerate() {
        let o = offsets[i];
        let d = 2 * dims[i];
        q0.view_mut((o, o), (d, d)).copy_from(&lift_hermitian(gram));
    }
    let mut constraints = Vec::new();
    for i in 0..rp.groups() {
        for (k, &gamma) in rp.gamma[i].iter().enumerate() {
            let scale = 1.0 / gamma + 1.0;
            let mut f = DMatrix::zeros(n, 2 * rp.groups());
            for j in 0..rp.groups() {
                let lifted = lift_rank_one(&rp.f[j][i][k]);
                f.view_mut((offsets[j], 2 * j), (2 * dims[j], 2)).copy_from(&lifted);
            }
            let fik = &rp.f[i][i][k];
            let proj = fik.dotc(&v[i]);
            let mut lin = DVector::zeros(n);
            let c_vec = fik * proj;
            lin.rows_mut(offsets[i], 2 * dims[i])
                .copy_from(&(lift_vec(&c_vec) * (-scale)));
            let c = scale * proj.norm_sqr() + rp.sigma2;
            constraints.push(QuadConstraint::new(Quadratic::Factored(f), lin, c));
        }
    }
    ConvexQcqp {
        n,
        objective: QuadConstraint::new(Quadratic::Dense(q0), DVector::zeros(n), 0.0),
        constraints,
    }
}

fn lift_coords(b: &[CVec]) -> DVector<f64> {
    let parts: Vec<DVector<f64>> = b.iter().map(lift_vec).collect();
    let n = parts.iter().map(|p| p.len()).sum();
    let mut x = DVector::zeros(n);
    let mut o = 0;
    for p in parts {
        x.rows_mut(o, p.len()).copy_from(&p);
        o += p.len();
    }
    x
}

fn unlift_coords(x: &DVector<f64>, dims: &[usize]) -> Vec<CVec> {
    let mut o = 0;
    dims.iter()
        .map(|&r| {
            let v = unlift_vec(&x.rows(o, 2 * r).into_owned());
            o += 2 * r;
            v
        })
        .collect()
}

/// Successive convex approximation from a feasible start `v0`.
///
/// Each step solves [`sca_subproblem`] at the current point; a step is kept
/// only if it does not increase the objective, so the trajectory is
/// nonincreasing.
pub fn solve_weights_sca(rp: &ReducedProblem, v0: &[CVec], opts: ScaOptions) -> Result<(Vec<CVec>, SolverReport)> {
    let start = Instant::now();
    if v0.len() != rp.groups() || v0.iter().zip(rp.dims()).any(|(v, r)| v.len() != r) {
        return Err(Error::DimensionMismatch("start does not match the reduced problem".into()));
    }
    let (ratio, index) = rp.min_ratio(v0);
    if ratio < 1.0 - SINR_SLACK {
        return Err(Error::InfeasibleStart {
            index,
            violation: 1.0 - ratio,
        });
    }
    let dims = rp.dims();
    let mut v = v0.to_vec();
    let mut obj = rp.objective(&v);
    let mut report = SolverReport::new(SolverStatus::IterLimit);
    report.trajectory.push(obj);
    let reached = |o: f64| opts.target.is_some_and(|t| o <= t);
    if reached(obj) {
        report.status = SolverStatus::Optimal;
    }
    for it in 0..opts.max_iter {
        if reached(obj) {
            break;
        }
        let sub = sca_subproblem(rp, &v);
        let x0 = lift_coords(&v) * (1.0 + 1e-4);
        let (x, _) = solve_convex_qcqp(&sub, Some(&x0), opts.qcqp)?;
        let cand = unlift_coords(&x, &dims);
        let cand_obj = rp.objective(&cand);
        report.iterations = it + 1;
        if !(cand_obj <= obj) || rp.min_ratio(&cand).0 < 1.0 - SINR_SLACK {
            report.status = SolverStatus::Optimal;
            break;
        }
        let decrease = (obj - cand_obj) / obj.abs().max(f64::MIN_POSITIVE);
        v = cand;
        obj = cand_obj;
        report.trajectory.push(obj);
        if decrease <= opts.tol || reached(obj) {
            report.status = SolverStatus::Optimal;
            break;
        }
    }
    report.objective = obj;
    report.gap = match report.trajectory.as_slice() {
        [.., a, b] => (a - b) / a.abs().max(f64::MIN_POSITIVE),
        _ => 0.0,
    };
    report.wall_ms = elapsed_ms(start);
    Ok((v, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QosMethod {
    /// Fixed-point `λ`, weights by SDR with randomization.
    OptSdr,
    /// Fixed-point `λ`, SDR-seeded SCA weights.
    OptSca,
    /// Closed-form asymptotic `λ`, SDR-seeded SCA weights.
    AsymSca,
}

#[derive(Debug, Clone, Copy)]
pub struct QosOptions {
    pub n_rand: usize,
    pub seed: u64,
    /// `None` enables basis reduction exactly when `N > K_i` for every group.
    pub basis_reduction: Option<bool>,
    pub sca: ScaOptions,
    pub lambda: LambdaOptions,
    pub sdp: SdpOptions,
}

impl Default for QosOptions {
    fn default() -> Self {
        Self {
            n_rand: 300,
            seed: 0,
            basis_reduction: None,
            sca: ScaOptions::default(),
            lambda: LambdaOptions::default(),
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QosSolution {
    pub solution: StructuredSolution,
    /// Lower bound of the relaxed weight problem for the chosen `λ`.
    pub lower_bound: f64,
    pub power: f64,
    /// Iterations and trajectory of the final weight stage.
    pub report: SolverReport,
    pub lambda_report: Option<SolverReport>,
    /// Wall time of the weight stage alone (relaxation, extraction, SCA).
    pub weight_ms: f64,
}

/// End-to-end structured QoS pipeline: multipliers, reduced problem, weights,
/// and assembly `w_i = R⁻¹(λ) H_i a_i`.
pub fn solve_qos(ch: &ChannelSet, cfg: &SystemConfig, method: QosMethod, opts: QosOptions) -> Result<QosSolution> {
    let start = Instant::now();
    cfg.validate()?;
    ch.check(cfg)?;
    let (lambda, lambda_report) = match method {
        QosMethod::OptSdr | QosMethod::OptSca => {
            let (l, r) = fixed_point_lambda(ch, &cfg.gamma, opts.lambda)?;
            (l, Some(r))
        }
        QosMethod::AsymSca => (asymptotic_lambda_common(ch, &cfg.gamma)?, None),
    };
    let reduce = opts
        .basis_reduction
        .unwrap_or_else(|| cfg.k.iter().all(|&k| cfg.n > k));
    let rp = build_reduced_problem(ch, &lambda, &cfg.gamma, cfg.sigma2, reduce)?;
    let weight_start = Instant::now();
    let sdr = solve_weights_sdr_with(&rp, opts.n_rand, opts.seed, opts.sdp)?;
    let (coords, mut report) = match method {
        QosMethod::OptSdr => (sdr.coords.clone(), sdr.report.clone()),
        QosMethod::OptSca | QosMethod::AsymSca => solve_weights_sca(&rp, &sdr.coords, opts.sca)?,
    };
    let weight_ms = elapsed_ms(weight_start);
    let solution = assemble_structured(&rp, &lambda, &coords, ch, &cfg.gamma)?;
    let power = total_power(&solution.w);
    report.objective = power;
    report.wall_ms = elapsed_ms(start);
    Ok(QosSolution {
        solution,
        lower_bound: sdr.lower_bound,
        power,
        report,
        lambda_report,
        weight_ms,
    })
}

/// Map reduced coordinates back to weights and assemble the beamformers.
pub fn assemble_structured(
    rp: &ReducedProblem,
    lambda: &DualMultipliers,
    coords: &[CVec],
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<StructuredSolution> {
    let a = rp.to_weights(coords)?;
    let weights = GroupWeights::new(a);
    let w = assemble_beamformer(lambda, &weights, ch, gamma)?;
    let basis = rp.basis().map(|u| Basis {
        u: u.to_vec(),
        b: coords.to_vec(),
        r: u.iter().map(|m| m.ncols()).collect(),
    });
    let mut sol = StructuredSolution {
        lambda: lambda.clone(),
        weights,
        w,
        basis,
        assembled: true,
        stationary: false,
    };
    normalize_phase(&mut sol);
    Ok(sol)
}
