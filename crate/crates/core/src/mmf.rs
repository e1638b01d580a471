//! Max-min-fair beamforming under a total power budget.
//!
//! The MMF problem is the inverse of the QoS problem: the best common ratio
//! `t` at power `P` is the `t` whose QoS problem at targets `tγ` needs power
//! exactly `P`. Everything here searches over `t` by bisection except the
//! closed-form asymptotic beamformer.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::linalg::IdentityPlusLowRank;
use crate::numerics::report::elapsed_ms;
use crate::numerics::{CMat, SdpOptions, SolverReport, SolverStatus, C64};
use crate::qos::{min_sinr_ratio, total_power, BeamformerSet, DualMultipliers, GroupWeights};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::weights::{
    build_direct_problem, build_reduced_problem_with, relaxation, solve_qos, solve_weights_sca,
    solve_weights_sdr_with, DirectBasis, QosMethod, QosOptions, ReducedProblem,
};

pub const DEFAULT_TOL_T: f64 = 1e-3;
const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// A beamformer found feasible at some `t`, with its power.
#[derive(Debug, Clone)]
struct Probe<E> {
    w: BeamformerSet,
    power: f64,
    extra: E,
}

/// Outcome of a generic bisection over `t`.
struct Bisection<E> {
    t_hi: f64,
    best: Option<(f64, Probe<E>)>,
    report: SolverReport,
}

/// `P max_ik β_ik N / (σ² min_ik γ_ik)`.
pub fn initial_upper_bracket(ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let beta_max = ch.beta.iter().flatten().copied().fold(0.0, f64::max);
    let gamma_min = cfg.gamma.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    cfg.p * beta_max * ch.n() as f64 / (cfg.sigma2 * gamma_min)
}

/// Bisection on `t`. `probe(t)` returns `Some` when targets `tγ` are met with
/// power at most `P`, and `None` (or an infeasibility error) otherwise. Stops
/// when the bracket is relatively narrower than `tol` or, if
/// `stop_on_power`, when a probe's power is within `tol·P` of `P`.
fn bisect<E: Clone>(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tol: f64,
    stop_on_power: bool,
    mut probe: impl FnMut(f64) -> Result<Option<Probe<E>>>,
) -> Result<Bisection<E>> {
    let start = Instant::now();
    if !(cfg.p > 0.0) {
        return Err(Error::InvalidConfig("power budget must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("bisection tolerance must be positive".into()));
    }
    let mut report = SolverReport::new(SolverStatus::IterLimit);
    let mut eval = |t: f64, report: &mut SolverReport| -> Result<Option<Probe<E>>> {
        report.iterations += 1;
        let out = match probe(t) {
            Ok(p) => p,
            Err(e) if e.is_infeasibility() || matches!(e, Error::IterLimit(_)) => None,
            Err(e) => return Err(e),
        };
        report.trajectory.push(t);
        Ok(out)
    };
    let mut best: Option<(f64, Probe<E>)> = None;
    let mut t_lo = 0.0;
    let mut t_hi = initial_upper_bracket(ch, cfg);
    let mut doublings = 0;
    while let Some(p) = eval(t_hi, &mut report)? {
        t_lo = t_hi;
        best = Some((t_hi, p));
        t_hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NumericalFailure("no infeasible upper bracket found".into()));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if t_hi - t_lo <= tol * t_hi {
            report.status = SolverStatus::Optimal;
            break;
        }
        let t = 0.5 * (t_lo + t_hi);
        match eval(t, &mut report)? {
            Some(p) => {
                let close = stop_on_power && (cfg.p - p.power).abs() <= tol * cfg.p;
                t_lo = t;
                best = Some((t, p));
                if close {
                    report.status = SolverStatus::Optimal;
                    break;
                }
            }
            None => t_hi = t,
        }
    }
    report.gap = (t_hi - t_lo) / t_hi;
    report.wall_ms = elapsed_ms(start);
    Ok(Bisection {
        t_hi,
        best,
        report,
    })
}

/// Scale `w` up to power `P` and return it with its exact ratio `t`.
fn to_budget(w: &BeamformerSet, ch: &ChannelSet, cfg: &SystemConfig) -> Result<(BeamformerSet, f64)> {
    let mut w = w.scaled((cfg.p / total_power(w)).sqrt());
    while total_power(&w) > cfg.p {
        w = w.scaled(1.0 - 1e-15);
    }
    let t = min_sinr_ratio(&w, ch, &cfg.gamma, cfg.sigma2)?;
    Ok((w, t))
}

#[derive(Debug, Clone)]
pub struct MmfSolution {
    /// Beamformers at full power `P`.
    pub w: BeamformerSet,
    /// `min_ik SINR_ik/γ_ik` of `w`.
    pub t: f64,
    /// Ratio at which the last feasible probe was solved; `lambda` and
    /// `weights` belong to targets `t_probe·γ`.
    pub t_probe: f64,
    /// QoS multipliers of the last feasible probe.
    pub lambda: Option<DualMultipliers>,
    pub weights: Option<GroupWeights>,
    pub report: SolverReport,
}

/// MMF by bisection over QoS problems at targets `tγ`.
///
/// QoS failures count as "power above `P`". The returned beamformer is the
/// last feasible probe scaled to power `P`, so its ratio is at least the
/// bisection's lower bracket.
pub fn solve_mmf_bisection(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    method: QosMethod,
    tol_t: f64,
    opts: QosOptions,
) -> Result<MmfSolution> {
    cfg.validate()?;
    ch.check(cfg)?;
    let mut qos_opts = opts;
    // Anything certified to need more than P is settled early.
    qos_opts.sdp.dual_stop = Some(cfg.p);
    let bis = bisect(ch, cfg, tol_t, true, |t| {
        let scaled = cfg.with_scaled_targets(t);
        let sol = solve_qos(ch, &scaled, method, qos_opts)?;
        Ok((sol.power <= cfg.p).then(|| Probe {
            w: sol.solution.w.clone(),
            power: sol.power,
            extra: (sol.solution.lambda.clone(), sol.solution.weights.clone()),
        }))
    })?;
    let (t_probe, probe) = bis
        .best
        .ok_or_else(|| Error::Infeasible(Box::new(bis.report.clone())))?;
    let (w, t) = to_budget(&probe.w, ch, cfg)?;
    let mut report = bis.report;
    report.objective = t;
    report.residual = (probe.power - cfg.p).abs() / cfg.p;
    Ok(MmfSolution {
        w,
        t,
        t_probe,
        lambda: Some(probe.extra.0),
        weights: Some(probe.extra.1),
        report,
    })
}

/// `t° = P / (σ² λᵀγ)`.
pub fn mmf_value(lambda: &DualMultipliers, cfg: &SystemConfig) -> f64 {
    cfg.p / (cfg.sigma2 * lambda.dot_gamma(&cfg.gamma))
}

/// `R̃(λ) = I + (P/σ²) Σ_ik (λ_ik γ_ik / λᵀγ) h_ik h_ikᴴ`.
pub fn mmf_covariance(lambda: &DualMultipliers, ch: &ChannelSet, cfg: &SystemConfig) -> Result<IdentityPlusLowRank> {
    let total = lambda.dot_gamma(&cfg.gamma);
    if !(total > 0.0) {
        return Err(Error::InvalidProblem("λᵀγ must be positive".into()));
    }
    let scale = cfg.p / (cfg.sigma2 * total);
    let d: Vec<f64> = ch
        .users()
        .map(|(i, k)| scale * lambda.lambda[i][k] * cfg.gamma[i][k])
        .collect();
    IdentityPlusLowRank::new(ch.stacked(), &d)
}

/// `w_i = R̃⁻¹(λ) H_i a_i`, scaled to total power `P`, together with the
/// formula value `t° = P/(σ²λᵀγ)`.
pub fn assemble_mmf(
    lambda: &DualMultipliers,
    weights: &GroupWeights,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(BeamformerSet, f64)> {
    if lambda.lambda.iter().flatten().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidProblem("multipliers must be nonnegative".into()));
    }
    if weights.a.len() != ch.groups() || weights.a.iter().zip(&ch.h).any(|(a, h)| a.len() != h.ncols()) {
        return Err(Error::DimensionMismatch("weights do not match the group sizes".into()));
    }
    let r = mmf_covariance(lambda, ch, cfg)?;
    let w = BeamformerSet {
        w: ch
            .h
            .iter()
            .zip(&weights.a)
            .map(|(h, a)| r.solve(&CMat::from_columns(&[h * a])).column(0).into_owned())
            .collect(),
    };
    let p = total_power(&w);
    if !(p > 0.0) {
        return Err(Error::InvalidProblem("weights produce zero power".into()));
    }
    Ok((w.scaled((cfg.p / p).sqrt()), mmf_value(lambda, cfg)))
}

/// `1 / mean(1/β)`.
pub fn harmonic_mean(beta: &[f64]) -> f64 {
    beta.len() as f64 / beta.iter().map(|b| 1.0 / b).sum::<f64>()
}

/// `R̃∞ = I + (P β̄_h / (σ² K_tot)) Σ_ik g_ik g_ikᴴ`, `g_ik = h_ik/√β_ik`.
pub fn asymptotic_mmf_covariance(ch: &ChannelSet, cfg: &SystemConfig) -> Result<IdentityPlusLowRank> {
    if cfg.common_gamma().is_none() {
        return Err(Error::UnequalTargets);
    }
    let all: Vec<f64> = ch.beta.iter().flatten().copied().collect();
    let coef = cfg.p * harmonic_mean(&all) / (cfg.sigma2 * ch.k_tot() as f64);
    let d: Vec<f64> = ch.users().map(|(i, k)| coef / ch.beta[i][k]).collect();
    IdentityPlusLowRank::new(ch.stacked(), &d)
}

/// Weights optimized against the fixed covariance `R̃∞`: bisection over `t`
/// where each probe runs SDR then SCA on the reduced problem at `tγ`.
pub fn asym_mmf_sca(ch: &ChannelSet, cfg: &SystemConfig, tol_t: f64, opts: QosOptions) -> Result<MmfSolution> {
    cfg.validate()?;
    ch.check(cfg)?;
    let r = asymptotic_mmf_covariance(ch, cfg)?;
    let reduce = opts.basis_reduction.unwrap_or_else(|| cfg.k.iter().all(|&k| cfg.n > k));
    let base = build_reduced_problem_with(ch, &r, &cfg.gamma, cfg.sigma2, reduce)?;
    let mut sdp = opts.sdp;
    sdp.dual_stop = Some(cfg.p);
    let mut sca = opts.sca;
    sca.target = Some(cfg.p);
    let bis = bisect(ch, cfg, tol_t, true, |t| {
        let scaled = cfg.with_scaled_targets(t);
        let rp = base.with_gamma(&scaled.gamma);
        reduced_probe(&rp, cfg.p, opts.n_rand, opts.seed, sdp, sca)
    })?;
    let (t_probe, probe) = bis
        .best
        .ok_or_else(|| Error::Infeasible(Box::new(bis.report.clone())))?;
    let (w, t) = to_budget(&probe.w, ch, cfg)?;
    let mut report = bis.report;
    report.objective = t;
    Ok(MmfSolution {
        w,
        t,
        t_probe,
        lambda: None,
        weights: Some(GroupWeights::new(probe.extra)),
        report,
    })
}

fn reduced_probe(
    rp: &ReducedProblem,
    budget: f64,
    n_rand: usize,
    seed: u64,
    sdp: SdpOptions,
    sca: crate::weights::ScaOptions,
) -> Result<Option<Probe<Vec<crate::numerics::CVec>>>> {
    let sdr = solve_weights_sdr_with(rp, n_rand, seed, sdp)?;
    let (coords, power) = if sdr.objective <= budget {
        (sdr.coords, sdr.objective)
    } else {
        let (v, rep) = solve_weights_sca(rp, &sdr.coords, sca)?;
        (v, rep.objective)
    };
    if power > budget {
        return Ok(None);
    }
    let a = rp.to_weights(&coords)?;
    Ok(Some(Probe {
        w: rp.beamformers(&coords),
        power,
        extra: a,
    }))
}

/// Closed-form asymptotic MMF beamformer `w_i = c_i R̃∞⁻¹ H_i q_i` with
/// `q_ik = 1/β_ik`; `c_i` gives group `i` the power share
/// `K_i β̄_h / (K_tot β̄_{h,i})` of `P`.
pub fn cf_asym_mmf(ch: &ChannelSet, cfg: &SystemConfig) -> Result<BeamformerSet> {
    cfg.validate()?;
    ch.check(cfg)?;
    let r = asymptotic_mmf_covariance(ch, cfg)?;
    let all: Vec<f64> = ch.beta.iter().flatten().copied().collect();
    let beta_h = harmonic_mean(&all);
    let k_tot = ch.k_tot() as f64;
    let mut w = Vec::with_capacity(ch.groups());
    for (h, beta) in ch.h.iter().zip(&ch.beta) {
        let q = crate::numerics::CVec::from_iterator(beta.len(), beta.iter().map(|b| C64::new(1.0 / b, 0.0)));
        let dir = r.solve(&CMat::from_columns(&[h * q])).column(0).into_owned();
        let share = beta.len() as f64 * beta_h / (k_tot * harmonic_mean(beta));
        let c = (share * cfg.p / dir.norm_squared()).sqrt();
        w.push(dir * C64::new(c, 0.0));
    }
    Ok(BeamformerSet { w })
}

/// Upper bound on the achievable ratio `t`: bisection over the relaxed QoS
/// problem restricted to the channel span (which loses nothing for the
/// relaxation). Returns the upper bracket, so the value is certified up to
/// the SDP tolerance.
pub fn mmf_upper_bound(ch: &ChannelSet, cfg: &SystemConfig, tol_t: f64) -> Result<(f64, SolverReport)> {
    mmf_upper_bound_with(ch, cfg, tol_t, SdpOptions::default())
}

pub fn mmf_upper_bound_with(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tol_t: f64,
    opts: SdpOptions,
) -> Result<(f64, SolverReport)> {
    cfg.validate()?;
    ch.check(cfg)?;
    let base = build_direct_problem(ch, &cfg.gamma, cfg.sigma2, DirectBasis::ChannelSpan)?;
    let mut sdp = opts;
    sdp.dual_stop = Some(cfg.p);
    let bis = bisect::<()>(ch, cfg, tol_t, false, |t| {
        let rp = base.with_gamma(&cfg.with_scaled_targets(t).gamma);
        let sol = crate::numerics::solve_sdp(&relaxation(&rp), sdp)?;
        if sol.bound_exceeded.is_some() || sol.primal_objective > cfg.p {
            return Ok(None);
        }
        Ok(Some(Probe {
            w: BeamformerSet { w: Vec::new() },
            power: sol.primal_objective,
            extra: (),
        }))
    })?;
    let mut report = bis.report;
    report.objective = bis.t_hi;
    Ok((bis.t_hi, report))
}
