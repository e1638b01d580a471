//! JSON result files for single-instance solves.

use mcbf_core::qos::{DualMultipliers, GroupWeights};
use mcbf_core::scenario::{interleave, linear_to_db, ChannelSet, ScenarioFile, SystemConfig};
use mcbf_core::SolverReport;
use serde::{Deserialize, Serialize};

use crate::methods::{metrics, Method, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMetrics {
    /// QoS: transmit power. MMF: ratio `t`. Bound methods: the bound.
    pub objective: f64,
    pub power: Option<f64>,
    pub power_db: Option<f64>,
    pub min_sinr_db: Option<f64>,
    pub min_ratio: Option<f64>,
    pub feasible: bool,
    pub lower_bound: Option<f64>,
    pub iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub config: ScenarioFile,
    pub method: String,
    pub seed: u64,
    /// Per group, `[re₀, im₀, re₁, im₁, ...]`.
    pub w: Option<Vec<Vec<f64>>>,
    pub lambda: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<Vec<f64>>>,
    pub metrics: ResultMetrics,
    pub report: Option<SolverReport>,
}

fn lambda_json(l: &DualMultipliers) -> Vec<Vec<f64>> {
    l.lambda.clone()
}

fn weights_json(a: &GroupWeights) -> Vec<Vec<f64>> {
    a.a.iter().map(interleave).collect()
}

pub fn result_file(
    config: &ScenarioFile,
    method: Method,
    seed: u64,
    out: &Outcome,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> mcbf_core::Result<ResultFile> {
    let mmf = matches!(method, Method::Mmf(_));
    let mut m = ResultMetrics {
        objective: out.objective,
        power: None,
        power_db: None,
        min_sinr_db: None,
        min_ratio: None,
        feasible: out.objective.is_finite(),
        lower_bound: out.lower_bound,
        iters: out.iters,
        wall_ms: out.wall_ms,
    };
    if let Some(w) = &out.w {
        let mt = metrics(w, ch, cfg, mmf)?;
        m.power = Some(mt.power);
        m.power_db = Some(linear_to_db(mt.power / cfg.sigma2));
        m.min_sinr_db = Some(linear_to_db(mt.min_sinr));
        m.min_ratio = Some(mt.min_ratio);
        m.feasible = mt.feasible;
    }
    let mut config = config.clone();
    config.seed = seed;
    Ok(ResultFile {
        config,
        method: method.name().into(),
        seed,
        w: out.w.as_ref().map(|w| w.w.iter().map(interleave).collect()),
        lambda: out.lambda.as_ref().map(lambda_json),
        weights: out.weights.as_ref().map(weights_json),
        metrics: m,
        report: out.report.clone(),
    })
}
