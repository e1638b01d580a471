//! SINR and power evaluation, the weighted covariance `R(λ)`, and the
//! structured beamformer `w_i = R⁻¹(λ) H_i a_i` with its checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda::{fixed_point_lambda, LambdaOptions};
use crate::numerics::linalg::orthonormal_range;
use crate::numerics::{CMat, CVec, IdentityPlusLowRank, C64, RANK_TOL};
use crate::scenario::ChannelSet;

/// Relative SINR shortfall tolerated when judging feasibility.
pub const SINR_SLACK: f64 = 1e-6;

/// One beamforming vector per group.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub w: Vec<CVec>,
}

impl BeamformerSet {
    pub fn zeros(n: usize, groups: usize) -> Self {
        Self {
            w: vec![CVec::zeros(n); groups],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w: self.w.iter().map(|w| w * C64::new(s, 0.0)).collect(),
        }
    }

    pub fn group_powers(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.norm_squared()).collect()
    }
}

/// Lagrange multipliers `λ_ik ≥ 0`, grouped like the users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMultipliers {
    pub lambda: Vec<Vec<f64>>,
}

impl DualMultipliers {
    pub fn zeros(k: &[usize]) -> Self {
        Self {
            lambda: k.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.lambda.iter().flatten().copied().collect()
    }

    /// `λᵀγ`.
    pub fn dot_gamma(&self, gamma: &[Vec<f64>]) -> f64 {
        self.lambda
            .iter()
            .flatten()
            .zip(gamma.iter().flatten())
            .map(|(l, g)| l * g)
            .sum()
    }
}

/// Group-channel weights `a_i`, with `α_i = a_i/(1+γ_i)` and `δ_ik = h_ikᴴw_i`
/// when known.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWeights {
    pub a: Vec<CVec>,
    pub alpha: Option<Vec<CVec>>,
    pub delta: Option<Vec<CVec>>,
}

impl GroupWeights {
    pub fn new(a: Vec<CVec>) -> Self {
        Self {
            a,
            alpha: None,
            delta: None,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(self.a.iter().map(|a| a * c).collect())
    }
}

/// Low-dimensional representation `H_i a_i = U_i b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub u: Vec<CMat>,
    pub b: Vec<CVec>,
    pub r: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSolution {
    pub lambda: DualMultipliers,
    pub weights: GroupWeights,
    pub w: BeamformerSet,
    pub basis: Option<Basis>,
    /// `w_i = R⁻¹(λ) H_i a_i` holds by construction.
    pub assembled: bool,
    /// `a_ik = λ_ik δ_ik (1+γ_ik)` holds as well; `alpha` and `delta` are then
    /// populated.
    pub stationary: bool,
}

fn check_groups(w: &BeamformerSet, ch: &ChannelSet) -> Result<()> {
    if w.w.len() != ch.groups() || w.w.iter().any(|v| v.len() != ch.n()) {
        return Err(Error::DimensionMismatch(format!(
            "{} beamformers for {} groups of dimension {}",
            w.w.len(),
            ch.groups(),
            ch.n()
        )));
    }
    Ok(())
}

fn check_grouped(x: &[Vec<f64>], ch: &ChannelSet, what: &str) -> Result<()> {
    if x.len() != ch.groups() || x.iter().zip(&ch.h).any(|(v, h)| v.len() != h.ncols()) {
        return Err(Error::DimensionMismatch(format!("{what} does not match the group sizes")));
    }
    Ok(())
}

/// `|w_jᴴ h_ik|²` for all `j` and users `(i, k)`: entry `[i][k][j]`.
fn gains(w: &BeamformerSet, ch: &ChannelSet) -> Vec<Vec<Vec<f64>>> {
    let wm = CMat::from_columns(&w.w);
    ch.h.iter()
        .map(|h| {
            let c = wm.adjoint() * h;
            (0..h.ncols())
                .map(|k| c.column(k).iter().map(|z| z.norm_sqr()).collect())
                .collect()
        })
        .collect()
}

/// `SINR_ik = |w_iᴴh_ik|² / (Σ_{j≠i} |w_jᴴh_ik|² + σ²)`.
pub fn sinr(w: &BeamformerSet, ch: &ChannelSet, sigma2: f64) -> Result<Vec<Vec<f64>>> {
    check_groups(w, ch)?;
    Ok(gains(w, ch)
        .into_iter()
        .enumerate()
        .map(|(i, users)| {
            users
                .into_iter()
                .map(|g| {
                    let interference: f64 =
                        g.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
                    g[i] / (interference + sigma2)
                })
                .collect()
        })
        .collect())
}

/// `Σ_i ‖w_i‖²`.
pub fn total_power(w: &BeamformerSet) -> f64 {
    w.w.iter().map(|v| v.norm_squared()).sum()
}

/// `min_ik SINR_ik / γ_ik`.
pub fn min_sinr_ratio(w: &BeamformerSet, ch: &ChannelSet, gamma: &[Vec<f64>], sigma2: f64) -> Result<f64> {
    let s = sinr(w, ch, sigma2)?;
    Ok(s.iter()
        .flatten()
        .zip(gamma.iter().flatten())
        .map(|(s, g)| s / g)
        .fold(f64::INFINITY, f64::min))
}

/// All targets met up to [`SINR_SLACK`].
pub fn is_feasible(w: &BeamformerSet, ch: &ChannelSet, gamma: &[Vec<f64>], sigma2: f64) -> Result<bool> {
    Ok(min_sinr_ratio(w, ch, gamma, sigma2)? >= 1.0 - SINR_SLACK)
}

/// `R(λ)` (or `R_{i⁻}(λ)` when `exclude = Some(i)`) as an
/// identity-plus-low-rank operator.
pub fn covariance_operator(
    lambda: &DualMultipliers,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
    exclude: Option<usize>,
) -> Result<IdentityPlusLowRank> {
    check_grouped(&lambda.lambda, ch, "lambda")?;
    check_grouped(gamma, ch, "gamma")?;
    if lambda.lambda.iter().flatten().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidProblem("multipliers must be nonnegative".into()));
    }
    let mut cols = Vec::new();
    let mut d = Vec::new();
    for (i, k) in ch.users() {
        if Some(i) == exclude {
            continue;
        }
        cols.push(ch.h[i].column(k).into_owned());
        d.push(lambda.lambda[i][k] * gamma[i][k]);
    }
    let h = if cols.is_empty() {
        CMat::zeros(ch.n(), 0)
    } else {
        CMat::from_columns(&cols)
    };
    IdentityPlusLowRank::new(h, &d)
}

/// `R(λ) = I + Σ_i Σ_k λ_ik γ_ik h_ik h_ikᴴ`.
pub fn build_r(lambda: &DualMultipliers, ch: &ChannelSet, gamma: &[Vec<f64>]) -> Result<CMat> {
    Ok(covariance_operator(lambda, ch, gamma, None)?.to_dense())
}

/// `R_{i⁻}(λ)`: `R(λ)` without group `i`'s own terms.
pub fn build_r_minus(
    lambda: &DualMultipliers,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
    i: usize,
) -> Result<CMat> {
    if i >= ch.groups() {
        return Err(Error::DimensionMismatch(format!("group {i} out of range")));
    }
    Ok(covariance_operator(lambda, ch, gamma, Some(i))?.to_dense())
}

fn check_weights(a: &GroupWeights, ch: &ChannelSet) -> Result<()> {
    if a.a.len() != ch.groups() || a.a.iter().zip(&ch.h).any(|(v, h)| v.len() != h.ncols()) {
        return Err(Error::DimensionMismatch("weights do not match the group sizes".into()));
    }
    Ok(())
}

/// `w_i = R⁻¹(λ) H_i a_i`.
pub fn assemble_beamformer(
    lambda: &DualMultipliers,
    a: &GroupWeights,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<BeamformerSet> {
    check_weights(a, ch)?;
    let r = covariance_operator(lambda, ch, gamma, None)?;
    let rhs = CMat::from_columns(
        &ch.h.iter().zip(&a.a).map(|(h, a)| h * a).collect::<Vec<_>>(),
    );
    let w = r.solve(&rhs);
    Ok(BeamformerSet {
        w: w.column_iter().map(|c| c.into_owned()).collect(),
    })
}

/// `w_i = R_{i⁻}⁻¹(λ) H_i α_i` with `α_i = a_i / (1+γ_i)`.
///
/// Agrees with [`assemble_beamformer`] when `a` satisfies the stationarity
/// relation `a_ik = λ_ik δ_ik (1+γ_ik)`.
pub fn assemble_beamformer_interference(
    lambda: &DualMultipliers,
    alpha: &[CVec],
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<BeamformerSet> {
    check_weights(&GroupWeights::new(alpha.to_vec()), ch)?;
    let mut w = Vec::with_capacity(ch.groups());
    for (i, h) in ch.h.iter().enumerate() {
        let r = covariance_operator(lambda, ch, gamma, Some(i))?;
        let rhs = h * &alpha[i];
        w.push(r.solve(&CMat::from_column_slice(rhs.len(), 1, rhs.as_slice())).column(0).into_owned());
    }
    Ok(BeamformerSet { w })
}

/// `δ_ik = h_ikᴴ w_i`.
pub fn delta(w: &BeamformerSet, ch: &ChannelSet) -> Result<Vec<CVec>> {
    check_groups(w, ch)?;
    Ok(ch.h.iter().zip(&w.w).map(|(h, w)| h.adjoint() * w).collect())
}

/// Weights implied by `w` through `a_ik = λ_ik δ_ik (1+γ_ik)`, with `α` and
/// `δ` populated.
pub fn stationary_weights(
    w: &BeamformerSet,
    lambda: &DualMultipliers,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<GroupWeights> {
    check_grouped(&lambda.lambda, ch, "lambda")?;
    let d = delta(w, ch)?;
    let alpha: Vec<CVec> = d
        .iter()
        .enumerate()
        .map(|(i, di)| CVec::from_fn(di.len(), |k, _| di[k] * lambda.lambda[i][k]))
        .collect();
    let a = alpha
        .iter()
        .enumerate()
        .map(|(i, al)| CVec::from_fn(al.len(), |k, _| al[k] * (1.0 + gamma[i][k])))
        .collect();
    Ok(GroupWeights {
        a,
        alpha: Some(alpha),
        delta: Some(d),
    })
}

/// `σ² λᵀγ`.
pub fn power_identity(lambda: &DualMultipliers, gamma: &[Vec<f64>], sigma2: f64) -> f64 {
    sigma2 * lambda.dot_gamma(gamma)
}

/// Classical unicast (`K_i = 1`) solution through uplink-downlink duality.
///
/// The multipliers come from the fixed point `λ_i (1+γ_i) h_iᴴ R⁻¹(λ) h_i = 1`,
/// beam directions are `R⁻¹(λ) h_i`, and powers solve the SINR equalities.
pub fn unicast_reference(
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
    sigma2: f64,
) -> Result<(BeamformerSet, DualMultipliers)> {
    if ch.h.iter().any(|h| h.ncols() != 1) {
        return Err(Error::InvalidProblem("unicast reference needs one user per group".into()));
    }
    let (lambda, _) = match fixed_point_lambda(ch, gamma, LambdaOptions::default()) {
        Ok(x) => x,
        Err(Error::IterLimit(rep)) => {
            let mut rep = *rep;
            rep.status = crate::numerics::SolverStatus::Infeasible;
            return Err(Error::Infeasible(Box::new(rep)));
        }
        Err(e) => return Err(e),
    };
    let g = ch.groups();
    let ones = GroupWeights::new(vec![CVec::from_element(1, C64::new(1.0, 0.0)); g]);
    let dirs = assemble_beamformer(&lambda, &ones, ch, gamma)?;
    let units: Vec<CVec> = dirs.w.iter().map(|w| w.normalize()).collect();
    // p_i |u_iᴴh_i|²/γ_i − Σ_{j≠i} p_j |u_jᴴh_i|² = σ².
    let mut m = DMatrix::zeros(g, g);
    for i in 0..g {
        let h = ch.h[i].column(0);
        for j in 0..g {
            let gain = units[j].dotc(&h).norm_sqr();
            m[(i, j)] = if i == j { gain / gamma[i][0] } else { -gain };
        }
    }
    let rhs = DVector::from_element(g, sigma2);
    let p = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular unicast power system".into()))?;
    if p.iter().any(|&x| !(x > 0.0)) {
        let mut rep = crate::numerics::SolverReport::new(crate::numerics::SolverStatus::Infeasible);
        rep.residual = p.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::Infeasible(Box::new(rep)));
    }
    let w = units
        .iter()
        .zip(p.iter())
        .map(|(u, &pi)| u * C64::new(pi.sqrt(), 0.0))
        .collect();
    Ok((BeamformerSet { w }, lambda))
}

/// `‖(I − Π_i) w_i‖ / ‖w_i‖` with `Π_i` the projector onto the columns of
/// `R⁻¹(λ) H_i`.
pub fn structure_residual(
    w: &BeamformerSet,
    lambda: &DualMultipliers,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_groups(w, ch)?;
    let r = covariance_operator(lambda, ch, gamma, None)?;
    let mut out = Vec::with_capacity(ch.groups());
    for (h, wi) in ch.h.iter().zip(&w.w) {
        let nrm = wi.norm();
        if nrm == 0.0 {
            out.push(0.0);
            continue;
        }
        let (u, _) = orthonormal_range(&r.solve(h), RANK_TOL)?;
        let proj = &u * (u.adjoint() * wi);
        out.push((wi - proj).norm() / nrm);
    }
    Ok(out)
}

/// Sine of the angle between `w_i` and `R_{i⁻}⁻¹(λ) Σ_k λ_ik δ_ik h_ik`, the
/// maximizer of the dual uplink Rayleigh quotient.
pub fn duality_check(
    w: &BeamformerSet,
    lambda: &DualMultipliers,
    ch: &ChannelSet,
    gamma: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let weights = stationary_weights(w, lambda, ch, gamma)?;
    let alpha = weights.alpha.expect("populated");
    let v = assemble_beamformer_interference(lambda, &alpha, ch, gamma)?;
    Ok(w.w.iter().zip(&v.w).map(|(a, b)| sine(a, b)).collect())
}

/// `sin ∠(a, b)`, zero when either vector vanishes.
pub fn sine(a: &CVec, b: &CVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // Orthogonal residual rather than sqrt(1 - cos²), which cannot resolve
    // angles below about 1e-8.
    let (ua, ub) = (a / C64::from(na), b / C64::from(nb));
    let resid = &ub - &ua * ua.dotc(&ub);
    resid.norm().min(1.0)
}

/// Rotate each `a_i` (and `w_i`, `b_i` with it) so that its first nonzero
/// entry is real and positive.
pub fn normalize_phase(sol: &mut StructuredSolution) {
    for i in 0..sol.weights.a.len() {
        let Some(first) = sol.weights.a[i].iter().find(|z| z.norm() > 0.0).copied() else {
            continue;
        };
        let rot = first.conj() / first.norm();
        sol.weights.a[i] *= rot;
        sol.w.w[i] *= rot;
        if let Some(al) = sol.weights.alpha.as_mut() {
            al[i] *= rot;
        }
        if let Some(d) = sol.weights.delta.as_mut() {
            // δ = Hᴴw scales with w.
            d[i] *= rot;
        }
        if let Some(b) = sol.basis.as_mut() {
            b.b[i] *= rot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{gen_normalized_channels, SystemConfig};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hand_built_two_group_sinr() {
        let h1 = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let h2 = CMat::from_column_slice(2, 1, &[c(0.5, 0.0), c(1.0, 0.0)]);
        let ch = ChannelSet::new(vec![h1, h2], vec![vec![1.0], vec![1.0]]).unwrap();
        let w = BeamformerSet {
            w: vec![
                CVec::from_column_slice(&[c(1.0, 0.0), c(0.0, 0.0)]),
                CVec::from_column_slice(&[c(0.0, 0.0), c(2.0, 0.0)]),
            ],
        };
        let s = sinr(&w, &ch, 0.5).unwrap();
        // user 1: |w1ᴴh1|² = 1, |w2ᴴh1|² = |2·i|² = 4.
        assert!((s[0][0] - 1.0 / 4.5).abs() < 1e-15);
        // user 2: |w2ᴴh2|² = 4, |w1ᴴh2|² = 0.25.
        assert!((s[1][0] - 4.0 / 0.75).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_beam_has_zero_sinr() {
        let h = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let ch = ChannelSet::new(vec![h], vec![vec![1.0]]).unwrap();
        let w = BeamformerSet {
            w: vec![CVec::from_column_slice(&[c(0.0, 0.0), c(1.0, 0.0)])],
        };
        assert_eq!(sinr(&w, &ch, 1.0).unwrap()[0][0], 0.0);
    }

    #[test]
    fn zero_multipliers_give_identity_and_mrt() {
        let cfg = SystemConfig::uniform(2, 2, 4, 0.0);
        let ch = gen_normalized_channels(&cfg, 5).unwrap();
        let lam = DualMultipliers::zeros(&cfg.k);
        assert_eq!(build_r(&lam, &ch, &cfg.gamma).unwrap(), CMat::identity(4, 4));
        let mut e1 = CVec::zeros(2);
        e1[0] = c(1.0, 0.0);
        let a = GroupWeights::new(vec![e1.clone(), e1]);
        let w = assemble_beamformer(&lam, &a, &ch, &cfg.gamma).unwrap();
        assert!((&w.w[1] - ch.user(1, 0)).norm() < 1e-14);
    }

    #[test]
    fn unicast_single_user_is_mrt() {
        let h = CMat::from_column_slice(3, 1, &[c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 2.0)]);
        let nh = h.norm_squared();
        let ch = ChannelSet::new(vec![h], vec![vec![1.0]]).unwrap();
        let (w, lam) = unicast_reference(&ch, &[vec![4.0]], 2.0).unwrap();
        assert!((total_power(&w) - 2.0 * 4.0 / nh).abs() < 1e-10);
        assert!((lam.lambda[0][0] - 1.0 / nh).abs() < 1e-7 / nh);
    }

    #[test]
    fn phase_normalization_keeps_power() {
        let cfg = SystemConfig::uniform(2, 3, 6, 0.0);
        let ch = gen_normalized_channels(&cfg, 2).unwrap();
        let lam = DualMultipliers {
            lambda: vec![vec![0.1, 0.2, 0.3], vec![0.3, 0.2, 0.1]],
        };
        let a = GroupWeights::new(vec![
            CVec::from_column_slice(&[c(0.0, 1.0), c(1.0, 1.0), c(0.5, 0.0)]),
            CVec::from_column_slice(&[c(-1.0, 0.0), c(0.0, 0.0), c(0.5, -2.0)]),
        ]);
        let w = assemble_beamformer(&lam, &a, &ch, &cfg.gamma).unwrap();
        let mut sol = StructuredSolution {
            lambda: lam.clone(),
            weights: a,
            w: w.clone(),
            basis: None,
            assembled: true,
            stationary: false,
        };
        normalize_phase(&mut sol);
        assert!(sol.weights.a[0][0].im.abs() < 1e-15 && sol.weights.a[0][0].re > 0.0);
        let again = assemble_beamformer(&lam, &sol.weights, &ch, &cfg.gamma).unwrap();
        assert!((&again.w[1] - &sol.w.w[1]).norm() < 1e-12);
        assert!((total_power(&w) - total_power(&sol.w)).abs() < 1e-12);
    }
}
