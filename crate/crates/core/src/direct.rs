//! Full-dimension baselines that optimize `w_i` directly: SDR with Gaussian
//! randomization, and SCA seeded from a feasible point.

use crate::error::{Error, Result};
use crate::numerics::{solve_sdp, CVec, SdpOptions, SolverReport};
use crate::qos::{total_power, BeamformerSet};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::weights::{
    build_direct_problem, relaxation, solve_weights_sca, solve_weights_sdr_with, DirectBasis, ScaOptions,
};

/// Largest `N` for which [`DirectBasis::Full`] is accepted.
pub const DEFAULT_MAX_FULL_N: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    /// Search space of the relaxation.
    pub basis: DirectBasis,
    /// Search space of SCA. Every SCA subproblem has its optimum in the
    /// channel span, so both choices produce the same iterates.
    pub sca_basis: DirectBasis,
    pub max_full_n: usize,
    pub sdp: SdpOptions,
    pub sca: ScaOptions,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            basis: DirectBasis::Full,
            sca_basis: DirectBasis::ChannelSpan,
            max_full_n: DEFAULT_MAX_FULL_N,
            sdp: SdpOptions::default(),
            sca: ScaOptions::default(),
        }
    }
}

impl DirectOptions {
    /// Full search space up to the cap, channel span beyond it.
    pub fn auto(n: usize) -> Self {
        let mut o = Self::default();
        if n > o.max_full_n {
            o.basis = DirectBasis::ChannelSpan;
        }
        o
    }

    /// Channel span for both stages.
    pub fn span() -> Self {
        Self {
            basis: DirectBasis::ChannelSpan,
            ..Self::default()
        }
    }

    fn check(&self, basis: DirectBasis, n: usize) -> Result<()> {
        if basis == DirectBasis::Full && n > self.max_full_n {
            return Err(Error::InvalidConfig(format!(
                "direct baseline over C^N is capped at N = {}; got N = {n}",
                self.max_full_n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DirectSdrOutcome {
    pub w: BeamformerSet,
    /// Relaxed optimum over the PSD blocks `W_i`.
    pub lower_bound: f64,
    pub report: SolverReport,
}

/// Relax the QoS problem over `W_i ⪰ 0`, then extract by randomization and
/// per-group power scaling.
pub fn direct_sdr_qos(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    n_rand: usize,
    seed: u64,
    opts: DirectOptions,
) -> Result<DirectSdrOutcome> {
    ch.check(cfg)?;
    opts.check(opts.basis, ch.n())?;
    let rp = build_direct_problem(ch, &cfg.gamma, cfg.sigma2, opts.basis)?;
    let out = solve_weights_sdr_with(&rp, n_rand, seed, opts.sdp)?;
    Ok(DirectSdrOutcome {
        w: rp.beamformers(&out.coords),
        lower_bound: out.lower_bound,
        report: out.report,
    })
}

/// Certified lower bound on the QoS power: the dual objective of the
/// relaxation over `W_i ⪰ 0`, solved in the channel span.
pub fn qos_lower_bound(ch: &ChannelSet, cfg: &SystemConfig, sdp: SdpOptions) -> Result<(f64, SolverReport)> {
    ch.check(cfg)?;
    let rp = build_direct_problem(ch, &cfg.gamma, cfg.sigma2, DirectBasis::ChannelSpan)?;
    let sol = solve_sdp(&relaxation(&rp), sdp)?;
    let mut report = sol.report;
    report.objective = sol.dual_objective;
    Ok((sol.dual_objective, report))
}

/// SCA on the QoS problem from a feasible `z0`.
pub fn direct_sca_qos(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    z0: &BeamformerSet,
    opts: DirectOptions,
) -> Result<(BeamformerSet, SolverReport)> {
    ch.check(cfg)?;
    opts.check(opts.sca_basis, ch.n())?;
    if z0.w.len() != ch.groups() || z0.w.iter().any(|w| w.len() != ch.n()) {
        return Err(Error::DimensionMismatch("start beamformers do not match channels".into()));
    }
    let rp = build_direct_problem(ch, &cfg.gamma, cfg.sigma2, opts.sca_basis)?;
    // Projection onto the channel span keeps every gain and never adds power.
    let v0: Vec<CVec> = rp.gmat.iter().zip(&z0.w).map(|(g, w)| g.adjoint() * w).collect();
    let (v, mut report) = solve_weights_sca(&rp, &v0, opts.sca)?;
    let w = rp.beamformers(&v);
    report.objective = total_power(&w);
    Ok((w, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qos::{is_feasible, unicast_reference};
    use crate::scenario::gen_normalized_channels;

    #[test]
    fn unicast_relaxation_is_tight() {
        let cfg = SystemConfig::uniform(3, 1, 6, 5.0);
        let ch = gen_normalized_channels(&cfg, 2).unwrap();
        let out = direct_sdr_qos(&ch, &cfg, 50, 1, DirectOptions::default()).unwrap();
        let (w_ref, _) = unicast_reference(&ch, &cfg.gamma, cfg.sigma2).unwrap();
        let p = total_power(&out.w);
        let p_ref = total_power(&w_ref);
        assert!((p - p_ref).abs() <= 1e-4 * p_ref, "{p} vs {p_ref}");
        assert!(out.lower_bound <= p * (1.0 + 1e-7));
    }

    #[test]
    fn span_and_full_bases_agree() {
        let cfg = SystemConfig::uniform(2, 3, 12, 6.0);
        let ch = gen_normalized_channels(&cfg, 5).unwrap();
        let full = direct_sdr_qos(&ch, &cfg, 100, 3, DirectOptions::default()).unwrap();
        let span_opts = DirectOptions {
            basis: DirectBasis::ChannelSpan,
            ..Default::default()
        };
        let span = direct_sdr_qos(&ch, &cfg, 100, 3, span_opts).unwrap();
        let rel = (full.lower_bound - span.lower_bound).abs() / full.lower_bound;
        assert!(rel < 1e-6, "{rel}");
        let (lb, _) = qos_lower_bound(&ch, &cfg, SdpOptions::default()).unwrap();
        assert!((lb - span.lower_bound).abs() <= 1e-9 * lb);
        let (w, rep) = direct_sca_qos(&ch, &cfg, &full.w, span_opts).unwrap();
        assert!(is_feasible(&w, &ch, &cfg.gamma, cfg.sigma2).unwrap());
        assert!(total_power(&w) <= total_power(&full.w) * (1.0 + 1e-12));
        assert!(rep.trajectory.windows(2).all(|p| p[1] <= p[0]));
        let full_sca = DirectOptions {
            sca_basis: DirectBasis::Full,
            ..Default::default()
        };
        let (w_full, _) = direct_sca_qos(&ch, &cfg, &full.w, full_sca).unwrap();
        let (pa, pb) = (total_power(&w), total_power(&w_full));
        assert!((pa - pb).abs() <= 1e-5 * pa, "{pa} vs {pb}");
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = SystemConfig::uniform(1, 2, 70, 0.0);
        let ch = gen_normalized_channels(&cfg, 1).unwrap();
        assert!(matches!(
            direct_sdr_qos(&ch, &cfg, 10, 0, DirectOptions::default()),
            Err(Error::InvalidConfig(_))
        ));
    }
}
