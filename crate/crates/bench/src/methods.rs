//! Uniform dispatch over the QoS and MMF methods, with solve-stage timing.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use clap::ValueEnum;
use mcbf_core::direct::{direct_sca_qos, direct_sdr_qos, qos_lower_bound, DirectOptions};
use mcbf_core::mmf::{asym_mmf_sca, cf_asym_mmf, mmf_upper_bound_with, solve_mmf_bisection, DEFAULT_TOL_T};
use mcbf_core::qos::{min_sinr_ratio, sinr, total_power, BeamformerSet, DualMultipliers, GroupWeights, SINR_SLACK};
use mcbf_core::scenario::{ChannelSet, SystemConfig};
use mcbf_core::weights::{solve_qos, QosMethod, QosOptions};
use mcbf_core::{Result, SolverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum QosAlgo {
    OptSdr,
    OptSca,
    AsymSca,
    DirectSdr,
    DirectSca,
    /// Relaxation bound only; no beamformer.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum MmfAlgo {
    Qos2mmfSdr,
    Qos2mmfSca,
    AsymSca,
    CfAsym,
    /// Relaxation bound only; no beamformer.
    UpperBound,
}

/// Either kind of method, as named on the command line and in tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Qos(QosAlgo),
    Mmf(MmfAlgo),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Qos(QosAlgo::OptSdr) => "opt-sdr",
            Method::Qos(QosAlgo::OptSca) => "opt-sca",
            Method::Qos(QosAlgo::AsymSca) => "asym-sca",
            Method::Qos(QosAlgo::DirectSdr) => "direct-sdr",
            Method::Qos(QosAlgo::DirectSca) => "direct-sca",
            Method::Qos(QosAlgo::LowerBound) => "lower-bound",
            Method::Mmf(MmfAlgo::Qos2mmfSdr) => "qos2mmf-sdr",
            Method::Mmf(MmfAlgo::Qos2mmfSca) => "qos2mmf-sca",
            Method::Mmf(MmfAlgo::AsymSca) => "asym-sca",
            Method::Mmf(MmfAlgo::CfAsym) => "cf-asym",
            Method::Mmf(MmfAlgo::UpperBound) => "upper-bound",
        }
    }

    pub fn is_bound(self) -> bool {
        matches!(self, Method::Qos(QosAlgo::LowerBound) | Method::Mmf(MmfAlgo::UpperBound))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QosAlgo {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl FromStr for MmfAlgo {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

pub const ALL_QOS: [QosAlgo; 6] = [
    QosAlgo::LowerBound,
    QosAlgo::OptSdr,
    QosAlgo::OptSca,
    QosAlgo::AsymSca,
    QosAlgo::DirectSdr,
    QosAlgo::DirectSca,
];

pub const ALL_MMF: [MmfAlgo; 5] = [
    MmfAlgo::UpperBound,
    MmfAlgo::Qos2mmfSdr,
    MmfAlgo::Qos2mmfSca,
    MmfAlgo::AsymSca,
    MmfAlgo::CfAsym,
];

/// Knobs shared by every dispatched solve.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub qos: QosOptions,
    pub tol_t: f64,
    /// Largest `N` at which the direct baselines run at all.
    pub direct_max_n: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            qos: QosOptions::default(),
            tol_t: DEFAULT_TOL_T,
            direct_max_n: 200,
        }
    }
}

/// Result of one method on one instance.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub w: Option<BeamformerSet>,
    pub lambda: Option<DualMultipliers>,
    pub weights: Option<GroupWeights>,
    /// QoS: transmit power. MMF: ratio `t`. Bound rows: the bound itself.
    pub objective: f64,
    pub lower_bound: Option<f64>,
    pub iters: usize,
    /// Solve stage only.
    pub wall_ms: f64,
    pub report: Option<SolverReport>,
}

impl Outcome {
    fn bound(value: f64, report: SolverReport, wall_ms: f64) -> Self {
        Self {
            w: None,
            lambda: None,
            weights: None,
            objective: value,
            lower_bound: None,
            iters: report.iterations,
            wall_ms,
            report: Some(report),
        }
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn direct_opts(ch: &ChannelSet, run: &RunOptions) -> Result<DirectOptions> {
    if ch.n() > run.direct_max_n {
        return Err(mcbf_core::Error::InvalidConfig(format!(
            "direct baselines are disabled above N = {}",
            run.direct_max_n
        )));
    }
    let mut o = DirectOptions::auto(ch.n());
    o.sdp = run.qos.sdp;
    o.sca = run.qos.sca;
    Ok(o)
}

pub fn run_qos(ch: &ChannelSet, cfg: &SystemConfig, algo: QosAlgo, seed: u64, run: &RunOptions) -> Result<Outcome> {
    let qos = QosOptions { seed, ..run.qos };
    let structured = |m: QosMethod| -> Result<Outcome> {
        let start = Instant::now();
        let sol = solve_qos(ch, cfg, m, qos)?;
        let wall_ms = ms(start);
        Ok(Outcome {
            objective: sol.power,
            lower_bound: Some(sol.lower_bound),
            iters: sol.report.iterations,
            wall_ms,
            w: Some(sol.solution.w),
            lambda: Some(sol.solution.lambda),
            weights: Some(sol.solution.weights),
            report: Some(sol.report),
        })
    };
    match algo {
        QosAlgo::OptSdr => structured(QosMethod::OptSdr),
        QosAlgo::OptSca => structured(QosMethod::OptSca),
        QosAlgo::AsymSca => structured(QosMethod::AsymSca),
        QosAlgo::DirectSdr | QosAlgo::DirectSca => {
            let opts = direct_opts(ch, run)?;
            let start = Instant::now();
            let sdr = direct_sdr_qos(ch, cfg, qos.n_rand, seed, opts)?;
            let (w, report) = if algo == QosAlgo::DirectSca {
                direct_sca_qos(ch, cfg, &sdr.w, opts)?
            } else {
                (sdr.w, sdr.report)
            };
            let wall_ms = ms(start);
            Ok(Outcome {
                objective: total_power(&w),
                lower_bound: Some(sdr.lower_bound),
                iters: report.iterations,
                wall_ms,
                w: Some(w),
                lambda: None,
                weights: None,
                report: Some(report),
            })
        }
        QosAlgo::LowerBound => {
            let start = Instant::now();
            let (lb, report) = qos_lower_bound(ch, cfg, run.qos.sdp)?;
            Ok(Outcome::bound(lb, report, ms(start)))
        }
    }
}

pub fn run_mmf(ch: &ChannelSet, cfg: &SystemConfig, algo: MmfAlgo, seed: u64, run: &RunOptions) -> Result<Outcome> {
    let qos = QosOptions { seed, ..run.qos };
    let start = Instant::now();
    let sol = match algo {
        MmfAlgo::Qos2mmfSdr => solve_mmf_bisection(ch, cfg, QosMethod::OptSdr, run.tol_t, qos)?,
        MmfAlgo::Qos2mmfSca => solve_mmf_bisection(ch, cfg, QosMethod::OptSca, run.tol_t, qos)?,
        MmfAlgo::AsymSca => asym_mmf_sca(ch, cfg, run.tol_t, qos)?,
        MmfAlgo::CfAsym => {
            let w = cf_asym_mmf(ch, cfg)?;
            let wall_ms = ms(start);
            let t = min_sinr_ratio(&w, ch, &cfg.gamma, cfg.sigma2)?;
            return Ok(Outcome {
                w: Some(w),
                lambda: None,
                weights: None,
                objective: t,
                lower_bound: None,
                iters: 0,
                wall_ms,
                report: None,
            });
        }
        MmfAlgo::UpperBound => {
            let (ub, report) = mmf_upper_bound_with(ch, cfg, run.tol_t, run.qos.sdp)?;
            return Ok(Outcome::bound(ub, report, ms(start)));
        }
    };
    let wall_ms = ms(start);
    Ok(Outcome {
        objective: sol.t,
        lower_bound: None,
        iters: sol.report.iterations,
        wall_ms,
        w: Some(sol.w),
        lambda: sol.lambda,
        weights: sol.weights,
        report: Some(sol.report),
    })
}

pub fn run_method(ch: &ChannelSet, cfg: &SystemConfig, m: Method, seed: u64, run: &RunOptions) -> Result<Outcome> {
    match m {
        Method::Qos(a) => run_qos(ch, cfg, a, seed, run),
        Method::Mmf(a) => run_mmf(ch, cfg, a, seed, run),
    }
}

/// Quantities recomputed from a beamformer, independent of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub power: f64,
    pub min_sinr: f64,
    pub min_ratio: f64,
    /// QoS: every SINR meets its target up to the slack. MMF: power within
    /// budget.
    pub feasible: bool,
}

pub fn metrics(w: &BeamformerSet, ch: &ChannelSet, cfg: &SystemConfig, mmf: bool) -> Result<Metrics> {
    let s = sinr(w, ch, cfg.sigma2)?;
    let power = total_power(w);
    let min_sinr = s.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let min_ratio = min_sinr_ratio(w, ch, &cfg.gamma, cfg.sigma2)?;
    let feasible = if mmf {
        power <= cfg.p * (1.0 + 1e-8)
    } else {
        min_ratio >= 1.0 - SINR_SLACK
    };
    Ok(Metrics {
        power,
        min_sinr,
        min_ratio,
        feasible,
    })
}
