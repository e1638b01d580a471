//! Multipliers `λ` from the fixed point `λ_ik = 1 / ((1+γ_ik) h_ikᴴ R⁻¹(λ) h_ik)`
//! and their large-antenna closed forms.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::report::elapsed_ms;
use crate::numerics::{CMat, SolverReport, SolverStatus};
use crate::qos::{build_r, covariance_operator, DualMultipliers};
use crate::scenario::ChannelSet;

#[derive(Debug, Clone, Copy)]
pub struct LambdaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new iterate, in `(0, 1]`; 1 is the plain update.
    pub damping: f64,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            damping: 1.0,
        }
    }
}

/// `h_ikᴴ R⁻¹(λ) h_il` for every pair of users, `K_tot × K_tot` in storage
/// order.
fn inner_products(lambda: &DualMultipliers, ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<CMat> {
    Ok(covariance_operator(lambda, ch, gamma, None)?.inner_inverse())
}

/// `max_ik |λ_ik (1+γ_ik) h_ikᴴR⁻¹(λ)h_ik − 1|`.
pub fn fixed_point_residual(lambda: &DualMultipliers, ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<f64> {
    let q = inner_products(lambda, ch, gamma)?;
    Ok(ch
        .users()
        .enumerate()
        .map(|(u, (i, k))| (lambda.lambda[i][k] * (1.0 + gamma[i][k]) * q[(u, u)].re - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Jacobi iteration on the fixed point, started at `λ_ik = 1/(β_ik N)`.
///
/// The report's trajectory holds the residual before each update.
pub fn fixed_point_lambda(
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
    opts: LambdaOptions,
) -> Result<(DualMultipliers, SolverReport)> {
    let start = Instant::now();
    if gamma.iter().flatten().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidProblem("SINR targets must be positive".into()));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidProblem(format!("damping {} outside (0, 1]", opts.damping)));
    }
    let n = ch.n() as f64;
    let mut lambda = DualMultipliers {
        lambda: ch
            .beta
            .iter()
            .map(|b| b.iter().map(|bk| 1.0 / (bk * n)).collect())
            .collect(),
    };
    let mut report = SolverReport::new(SolverStatus::IterLimit);
    for it in 0..=opts.max_iter {
        let q = inner_products(&lambda, ch, gamma)?;
        let mut residual: f64 = 0.0;
        let mut next = lambda.clone();
        for (u, (i, k)) in ch.users().enumerate() {
            let qk = q[(u, u)].re;
            let l = lambda.lambda[i][k];
            residual = residual.max((l * (1.0 + gamma[i][k]) * qk - 1.0).abs());
            let target = 1.0 / ((1.0 + gamma[i][k]) * qk);
            next.lambda[i][k] = (1.0 - opts.damping) * l + opts.damping * target;
        }
        report.trajectory.push(residual);
        report.residual = residual;
        report.iterations = it;
        if !residual.is_finite() {
            report.status = SolverStatus::NumericalFailure;
            break;
        }
        if residual <= opts.tol {
            report.status = SolverStatus::Optimal;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        lambda = next;
    }
    report.objective = lambda.flat().iter().sum();
    report.wall_ms = elapsed_ms(start);
    match report.status {
        SolverStatus::Optimal => Ok((lambda, report)),
        SolverStatus::NumericalFailure => Err(Error::NumericalFailure(
            "fixed-point residual became non-finite".into(),
        )),
        _ => Err(Error::IterLimit(Box::new(report))),
    }
}

/// `λ_ik = 1 / (β_ik (N − Σ_{jl≠ik} γ_jl))`.
pub fn asymptotic_lambda(beta: &[Vec<f64>], gamma: &[Vec<f64>], n: usize) -> Result<DualMultipliers> {
    if beta.len() != gamma.len() || beta.iter().zip(gamma).any(|(b, g)| b.len() != g.len()) {
        return Err(Error::DimensionMismatch("beta vs gamma".into()));
    }
    let total: f64 = gamma.iter().flatten().sum();
    let mut lambda = Vec::with_capacity(beta.len());
    for (b, g) in beta.iter().zip(gamma) {
        let mut row = Vec::with_capacity(b.len());
        for (bk, gk) in b.iter().zip(g) {
            let others = total - gk;
            let denom = n as f64 - others;
            if !(denom > 0.0) {
                return Err(Error::TooFewAntennas { n, required: others });
            }
            row.push(1.0 / (bk * denom));
        }
        lambda.push(row);
    }
    Ok(DualMultipliers { lambda })
}

/// `I + (1/(N/γ − (K_tot−1))) Σ_ik g_ik g_ikᴴ` with `g_ik = h_ik/√β_ik`, for
/// a common target `γ`.
pub fn asymptotic_r(ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<CMat> {
    let lambda = asymptotic_lambda_common(ch, gamma)?;
    build_r(&lambda, ch, gamma)
}

/// [`asymptotic_lambda`] restricted to equal targets, which is the regime
/// where the closed-form covariance is derived.
pub fn asymptotic_lambda_common(ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<DualMultipliers> {
    let first = gamma
        .first()
        .and_then(|g| g.first())
        .copied()
        .ok_or_else(|| Error::InvalidProblem("no users".into()))?;
    if gamma.iter().flatten().any(|&g| g != first) {
        return Err(Error::UnequalTargets);
    }
    asymptotic_lambda(&ch.beta, gamma, ch.n())
}

/// Normalized within-group cross terms `|λ_ik (1+γ_ik) h_ikᴴ R⁻¹(λ) h_il|`,
/// `l ≠ k`, which vanish when `λ` satisfies the full optimality system.
pub fn cross_terms(lambda: &DualMultipliers, ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<Vec<f64>> {
    let q = inner_products(lambda, ch, gamma)?;
    let mut offset = 0;
    let mut out = Vec::new();
    for (i, h) in ch.h.iter().enumerate() {
        let k = h.ncols();
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    let scale = lambda.lambda[i][a] * (1.0 + gamma[i][a]);
                    out.push(scale * q[(offset + a, offset + b)].norm());
                }
            }
        }
        offset += k;
    }
    Ok(out)
}
