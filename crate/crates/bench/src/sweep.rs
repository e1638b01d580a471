//! Monte Carlo sweeps over one scenario parameter.

use std::io::Write;
use std::str::FromStr;

use anyhow::{bail, Context};
use mcbf_core::scenario::{linear_to_db, GammaDb, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{metrics, run_method, Method, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    N,
    K,
    G,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::N => "N",
            Param::K => "K",
            Param::G => "G",
        }
    }
}

/// `N=50,100,200` style sweep specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: Param,
    pub values: Vec<usize>,
}

impl FromStr for SweepSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, list) = s.split_once('=').ok_or_else(|| format!("expected NAME=v1,v2,..., got {s:?}"))?;
        let param = match name.trim() {
            "N" => Param::N,
            "K" => Param::K,
            "G" => Param::G,
            other => return Err(format!("unknown sweep parameter {other:?} (use N, K or G)")),
        };
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() || values.contains(&0) {
            return Err("sweep values must be positive".into());
        }
        Ok(Self { param, values })
    }
}

/// One table row; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub param_name: String,
    pub param_value: usize,
    pub trial: usize,
    pub seed: u64,
    pub objective_db: f64,
    pub power_db: f64,
    pub min_sinr_db: f64,
    pub feasible: bool,
    pub iters: usize,
    pub wall_ms: f64,
}

/// Per-instance seed of trial `trial`.
pub fn instance_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// The base scenario with `param` set to `value`.
pub fn scenario_at(base: &Scenario, param: Param, value: usize) -> anyhow::Result<Scenario> {
    if base.file.channels.is_some() {
        bail!("sweeps need generated channels; the scenario lists explicit ones");
    }
    let mut f = base.file.clone();
    match param {
        Param::N => f.n = value,
        Param::K => f.k = vec![value; f.g],
        Param::G => {
            f.g = value;
            let k0 = *f.k.first().context("scenario has no groups")?;
            f.k = vec![k0; value];
        }
    }
    if param != Param::N && !matches!(f.gamma_db, GammaDb::Common(_)) {
        bail!("sweeping {} needs a common gamma_db", param.name());
    }
    Ok(Scenario::from_file(f)?)
}

fn failed_row(m: Method, param: Param, value: usize, trial: usize, seed: u64, wall_ms: f64) -> Row {
    Row {
        method: m.name().into(),
        param_name: param.name().into(),
        param_value: value,
        trial,
        seed,
        objective_db: f64::NAN,
        power_db: f64::NAN,
        min_sinr_db: f64::NAN,
        feasible: false,
        iters: 0,
        wall_ms,
    }
}

/// Run every method on one generated instance. Failures become rows with
/// `feasible = false` and NaN metrics.
pub fn run_instance(
    sc: &Scenario,
    methods: &[Method],
    param: Param,
    value: usize,
    trial: usize,
    seed: u64,
    run: &RunOptions,
) -> anyhow::Result<Vec<Row>> {
    let ch = sc.channels_with_seed(seed)?;
    let cfg = &sc.config;
    let gamma_min = cfg.gamma.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods {
        let mmf = matches!(m, Method::Mmf(_));
        let out = match run_method(&ch, cfg, m, seed, run) {
            Ok(o) => o,
            Err(_) => {
                rows.push(failed_row(m, param, value, trial, seed, f64::NAN));
                continue;
            }
        };
        let mut row = failed_row(m, param, value, trial, seed, out.wall_ms);
        row.iters = out.iters;
        match &out.w {
            Some(w) => {
                let mt = metrics(w, &ch, cfg, mmf)?;
                row.power_db = linear_to_db(mt.power / cfg.sigma2);
                row.min_sinr_db = linear_to_db(mt.min_sinr);
                row.feasible = mt.feasible;
                row.objective_db = if mmf { row.min_sinr_db } else { row.power_db };
            }
            None => {
                // Bound rows: power bound for QoS, min-SINR bound for MMF.
                row.feasible = out.objective.is_finite();
                row.objective_db = if mmf {
                    linear_to_db(out.objective * gamma_min)
                } else {
                    linear_to_db(out.objective / cfg.sigma2)
                };
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// All `(value, trial)` instances on the rayon pool; rows ordered by method
/// (in the order given), parameter value, then trial.
pub fn run_sweep(
    base: &Scenario,
    methods: &[Method],
    spec: &SweepSpec,
    trials: usize,
    seed: u64,
    run: &RunOptions,
) -> anyhow::Result<Vec<Row>> {
    let scenarios = spec
        .values
        .iter()
        .map(|&v| scenario_at(base, spec.param, v))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(p, t)| {
            run_instance(
                &scenarios[p],
                methods,
                spec.param,
                spec.values[p],
                t,
                instance_seed(seed, t),
                run,
            )
            .map(|rows| (p, t, rows))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut keyed: Vec<(usize, usize, usize, Row)> = per_job
        .into_iter()
        .flat_map(|(p, t, rows)| rows.into_iter().enumerate().map(move |(m, r)| (m, p, t, r)))
        .collect();
    keyed.sort_by_key(|(m, p, t, _)| (*m, *p, *t));
    Ok(keyed.into_iter().map(|(_, _, _, r)| r).collect())
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> anyhow::Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<Row>, _>>()?)
}

/// Mean and standard error of one (method, parameter value) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub method: String,
    pub param_name: String,
    pub param_value: usize,
    pub trials: usize,
    /// Trials that produced a finite objective.
    pub solved: usize,
    pub feasible: usize,
    pub mean_objective_db: f64,
    pub stderr_objective_db: f64,
    pub mean_wall_ms: f64,
}

/// Averages in dB over the solved trials of each cell, in row order.
pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::new();
    let mut cells: Vec<Vec<&Row>> = Vec::new();
    for r in rows {
        match out
            .iter()
            .position(|s| s.method == r.method && s.param_value == r.param_value && s.param_name == r.param_name)
        {
            Some(i) => cells[i].push(r),
            None => {
                out.push(Summary {
                    method: r.method.clone(),
                    param_name: r.param_name.clone(),
                    param_value: r.param_value,
                    trials: 0,
                    solved: 0,
                    feasible: 0,
                    mean_objective_db: f64::NAN,
                    stderr_objective_db: f64::NAN,
                    mean_wall_ms: f64::NAN,
                });
                cells.push(vec![r]);
            }
        }
    }
    for (s, cell) in out.iter_mut().zip(&cells) {
        let vals: Vec<f64> = cell.iter().map(|r| r.objective_db).filter(|v| v.is_finite()).collect();
        let times: Vec<f64> = cell.iter().map(|r| r.wall_ms).filter(|v| v.is_finite()).collect();
        s.trials = cell.len();
        s.solved = vals.len();
        s.feasible = cell.iter().filter(|r| r.feasible).count();
        let (m, se) = mean_stderr(&vals);
        s.mean_objective_db = m;
        s.stderr_objective_db = se;
        s.mean_wall_ms = mean_stderr(&times).0;
    }
    out
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn print_summary<W: Write>(mut out: W, summary: &[Summary]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:>5} {:>7} {:>9} {:>12} {:>10} {:>11}",
        "method", "param", "value", "solved", "mean [dB]", "stderr", "wall [ms]"
    )?;
    for s in summary {
        writeln!(
            out,
            "{:<12} {:>5} {:>7} {:>5}/{:<3} {:>12.4} {:>10.4} {:>11.2}",
            s.method, s.param_name, s.param_value, s.solved, s.trials, s.mean_objective_db, s.stderr_objective_db, s.mean_wall_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_parses() {
        let s: SweepSpec = "N=50,100,200".parse().unwrap();
        assert_eq!(s.param, Param::N);
        assert_eq!(s.values, vec![50, 100, 200]);
        assert!("X=1".parse::<SweepSpec>().is_err());
        assert!("N=".parse::<SweepSpec>().is_err());
        assert!("N=0,4".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // Sample variance 5/3 over n = 4.
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scenario_override_keeps_other_fields() {
        let base = Scenario::default_with(100, 3);
        let g = scenario_at(&base, Param::G, 2).unwrap();
        assert_eq!(g.config.k, vec![5, 5]);
        assert_eq!(g.config.n, 100);
        let k = scenario_at(&base, Param::K, 2).unwrap();
        assert_eq!(k.config.k, vec![2, 2, 2]);
    }
}
