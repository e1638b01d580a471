use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use mcbf_bench::methods::{run_method, MmfAlgo, Method, QosAlgo, RunOptions, ALL_MMF, ALL_QOS};
use mcbf_bench::output::result_file;
use mcbf_bench::sweep::{print_summary, run_sweep, summarize, write_csv, SweepSpec};
use mcbf_bench::validate::{check_names, validate, ValidateOptions};
use mcbf_core::scenario::{load_scenario, save_scenario, ChannelModel, GammaDb, Scenario, ScenarioFile};

/// Trials per cell with `--full-scale`.
const FULL_SCALE_TRIALS: usize = 1000;

#[derive(Parser)]
#[command(name = "mcbf", version, about = "Multi-group multicast beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a scenario file.
    Init {
        #[arg(long, default_value_t = 3)]
        g: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        gamma_db: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Power budget P/σ² in dB.
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        p_db: f64,
        #[arg(long, value_enum, default_value_t = Model::Normalized)]
        model: Model,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one QoS instance.
    SolveQos {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: QosAlgo,
        /// Channel and randomization seed; defaults to the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one max-min-fair instance.
    SolveMmf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: MmfAlgo,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = mcbf_core::mmf::DEFAULT_TOL_T)]
        tol_t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep over N, K or G.
    Bench {
        #[arg(value_enum)]
        kind: Kind,
        /// Base scenario; the default scenario (G=3, K=5, 10 dB) otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// For example `N=50,100,200`.
        #[arg(long)]
        sweep: SweepSpec,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Overrides --trials.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated method names; all methods of the kind by default.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-cell summary as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write wall_ms as 0 so that repeated runs give identical bytes.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, default_value_t = mcbf_core::mmf::DEFAULT_TOL_T)]
        tol_t: f64,
        /// Largest N at which the direct baselines run.
        #[arg(long, default_value_t = 200)]
        direct_max_n: usize,
    },
    /// Run the invariant suite; exits nonzero on failure.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated check names.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Perturb the power entering the power-identity check by this
        /// relative amount.
        #[arg(long, default_value_t = 0.0)]
        corrupt: f64,
        /// Print the check names and exit.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Qos,
    Mmf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Normalized,
    Pathloss,
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn solve_one(config: &Path, method: Method, seed: Option<u64>, run: RunOptions, out: Option<&Path>) -> anyhow::Result<()> {
    let sc = load_scenario(config).with_context(|| format!("reading {}", config.display()))?;
    let seed = seed.unwrap_or(sc.file.seed);
    let ch = sc.channels_with_seed(seed)?;
    let outcome = run_method(&ch, &sc.config, method, seed, &run)?;
    let res = result_file(&sc.file, method, seed, &outcome, &ch, &sc.config)?;
    write_json(out, &res)
}

fn parse_methods(kind: Kind, names: Option<Vec<String>>) -> anyhow::Result<Vec<Method>> {
    match (kind, names) {
        (Kind::Qos, None) => Ok(ALL_QOS.iter().map(|&a| Method::Qos(a)).collect()),
        (Kind::Mmf, None) => Ok(ALL_MMF.iter().map(|&a| Method::Mmf(a)).collect()),
        (Kind::Qos, Some(v)) => v
            .iter()
            .map(|s| s.parse::<QosAlgo>().map(Method::Qos).map_err(anyhow::Error::msg))
            .collect(),
        (Kind::Mmf, Some(v)) => v
            .iter()
            .map(|s| s.parse::<MmfAlgo>().map(Method::Mmf).map_err(anyhow::Error::msg))
            .collect(),
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Init { g, k, n, gamma_db, sigma2, p_db, model, seed, out } => {
            let file = ScenarioFile {
                g,
                k: vec![k; g],
                n,
                gamma_db: GammaDb::Common(gamma_db),
                sigma2,
                p: sigma2 * mcbf_core::scenario::db_to_linear(p_db),
                channel_model: match model {
                    Model::Normalized => ChannelModel::Normalized,
                    Model::Pathloss => ChannelModel::Pathloss,
                },
                seed,
                channels: None,
            };
            save_scenario(&out, &Scenario::from_file(file)?)?;
        }
        Cmd::SolveQos { config, method, seed, out } => {
            solve_one(&config, Method::Qos(method), seed, RunOptions::default(), out.as_deref())?;
        }
        Cmd::SolveMmf { config, method, seed, tol_t, out } => {
            let run = RunOptions { tol_t, ..Default::default() };
            solve_one(&config, Method::Mmf(method), seed, run, out.as_deref())?;
        }
        Cmd::Bench {
            kind,
            config,
            sweep,
            trials,
            full_scale,
            seed,
            methods,
            out,
            summary,
            no_timing,
            tol_t,
            direct_max_n,
        } => {
            let base = match &config {
                Some(p) => load_scenario(p).with_context(|| format!("reading {}", p.display()))?,
                None => Scenario::default_with(100, seed),
            };
            let methods = parse_methods(kind, methods)?;
            let trials = if full_scale { FULL_SCALE_TRIALS } else { trials };
            let run = RunOptions { tol_t, direct_max_n, ..Default::default() };
            let mut rows = run_sweep(&base, &methods, &sweep, trials, seed, &run)?;
            if no_timing {
                rows.iter_mut().for_each(|r| r.wall_ms = 0.0);
            }
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(BufWriter::new(file), &rows)?;
            let cells = summarize(&rows);
            if let Some(p) = summary {
                let mut w = csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))?;
                for c in &cells {
                    w.serialize(c)?;
                }
                w.flush()?;
            }
            print_summary(io::stdout().lock(), &cells)?;
        }
        Cmd::Validate { seed, only, corrupt, list } => {
            if list {
                let mut out = io::stdout().lock();
                for n in check_names() {
                    writeln!(out, "{n}")?;
                }
                return Ok(true);
            }
            if let Some(names) = &only {
                let known = check_names();
                if let Some(bad) = names.iter().find(|n| !known.contains(&n.as_str())) {
                    anyhow::bail!("unknown check {bad:?} (see `validate --list`)");
                }
            }
            let report = validate(&ValidateOptions { seed, corrupt, only })?;
            report.print(io::stdout().lock())?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
