//! The invariant suite behind `mcbf validate`: every check yields a value, a
//! threshold and a margin.

use std::fmt;
use std::io::Write;

use mcbf_core::direct::{direct_sca_qos, direct_sdr_qos, qos_lower_bound, DirectOptions};
use mcbf_core::lambda::{cross_terms, fixed_point_lambda, fixed_point_residual, LambdaOptions};
use mcbf_core::mmf::{assemble_mmf, cf_asym_mmf, solve_mmf_bisection};
use mcbf_core::numerics::lift::{lift_hermitian, lift_vec};
use mcbf_core::numerics::linalg::min_eigenvalue;
use mcbf_core::numerics::{
    orthonormal_range, solve_convex_qcqp, solve_sdp, CMat, ConvexQcqp, CVec, QcqpOptions, QuadConstraint,
    Quadratic, SdpOptions, C64,
};
use mcbf_core::qos::{
    assemble_beamformer, assemble_beamformer_interference, build_r, delta, duality_check, min_sinr_ratio, sine, sinr,
    stationary_weights, structure_residual, total_power, unicast_reference, BeamformerSet, DualMultipliers,
    GroupWeights, SINR_SLACK,
};
use mcbf_core::scenario::{gen_normalized_channels, gen_pathloss_channels, ChannelRng, ChannelSet, SystemConfig};
use mcbf_core::weights::{build_reduced_problem, relaxation, solve_qos, solve_weights_sdr, QosMethod, QosOptions};
use mcbf_core::Result;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub cmp: Cmp,
    /// Non-gating checks are reported (as WARN when they fail) but do not
    /// change the overall verdict.
    pub gating: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, cmp: Cmp::AtMost, gating: true }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, cmp: Cmp::AtLeast, gating: true }
    }

    fn advisory(self) -> Self {
        Self { gating: false, ..self }
    }

    pub fn passed(&self) -> bool {
        match self.cmp {
            Cmp::AtMost => self.value <= self.threshold,
            Cmp::AtLeast => self.value >= self.threshold,
        }
    }

    /// Distance to the threshold on the passing side; negative on failure.
    pub fn margin(&self) -> f64 {
        match self.cmp {
            Cmp::AtMost => self.threshold - self.value,
            Cmp::AtLeast => self.value - self.threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.cmp {
            Cmp::AtMost => "<=",
            Cmp::AtLeast => ">=",
        };
        write!(
            f,
            "{} {:<28} value={:.3e} {op} {:.3e} margin={:.3e}",
            match (self.passed(), self.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            },
            self.name,
            self.value,
            self.threshold,
            self.margin()
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Relative perturbation applied to the power entering the
    /// power-identity check.
    pub corrupt: f64,
    /// Run only the named checks.
    pub only: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct ValidateReport {
    pub checks: Vec<Check>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed() || !c.gating)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn print<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.checks {
            writeln!(out, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed() && c.gating).count();
        let warned = self.checks.iter().filter(|c| !c.passed() && !c.gating).count();
        writeln!(out, "{} checks, {failed} failed, {warned} advisory warnings", self.checks.len())
    }
}

type Group = (&'static [&'static str], fn(u64, f64) -> Result<Vec<Check>>);

const GROUPS: &[Group] = &[
    (&["lift_round_trip"], lift_round_trip),
    (&["sdp_weak_duality"], sdp_weak_duality),
    (&["qcqp_monotone"], qcqp_monotone),
    (&["range_idempotence"], range_idempotence),
    (&["rng_reproducibility", "independence_proxy"], scenario_checks),
    (&["form_equivalence", "scale_covariance", "r_eigen_floor"], assembly_checks),
    (
        &[
            "unicast_consistency",
            "unicast_active_constraints",
            "power_identity",
            "weight_relation",
            "duality_check",
            "duality_scale_invariance",
            "duality_random_nonzero",
        ],
        unicast_checks,
    ),
    (&["lambda_positivity", "lambda_certificate"], lambda_checks),
    (&["cross_term_mean_n500", "cross_term_increase"], cross_term_decay),
    (&["cdf_concentration"], cdf_concentration),
    (
        &["weight_sandwich", "weight_feasibility", "reduced_dimension", "randomization_determinism"],
        weight_checks,
    ),
    (&["structure_validation"], structure_validation),
    (&["direct_lower_bound", "direct_extraction_order"], direct_sandwich),
    (
        &["mmf_round_trip", "mmf_power_compliance", "mmf_ratio_exact", "mmf_monotone", "mmf_covariance_consistency"],
        mmf_checks,
    ),
];

/// Names of every check, in run order.
pub fn check_names() -> Vec<&'static str> {
    GROUPS.iter().flat_map(|(n, _)| n.iter().copied()).collect()
}

pub fn validate(opts: &ValidateOptions) -> Result<ValidateReport> {
    let wanted = |name: &str| opts.only.as_ref().is_none_or(|o| o.iter().any(|x| x == name));
    let mut checks = Vec::new();
    for (names, run) in GROUPS {
        if names.iter().any(|n| wanted(n)) {
            checks.extend(run(opts.seed, opts.corrupt)?.into_iter().filter(|c| wanted(c.name)));
        }
    }
    Ok(ValidateReport { checks })
}

fn rand_cmat(rng: &mut ChannelRng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| rng.complex_gaussian())
}

fn rand_cvec(rng: &mut ChannelRng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| rng.complex_gaussian())
}

fn rand_lambda(rng: &mut ChannelRng, ch: &ChannelSet) -> DualMultipliers {
    DualMultipliers {
        lambda: ch.k().iter().map(|&k| (0..k).map(|_| rng.uniform()).collect()).collect(),
    }
}

fn lift_round_trip(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut rng = ChannelRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rand_cmat(&mut rng, 5, 5);
        let a = &m + m.adjoint();
        let w = rand_cvec(&mut rng, 5);
        let complex = w.dotc(&(&a * &w)).re;
        let x = lift_vec(&w);
        let real = x.dot(&(lift_hermitian(&a) * &x));
        worst = worst.max((complex - real).abs() / complex.abs().max(1.0));
    }
    Ok(vec![Check::at_most("lift_round_trip", worst, 1e-12)])
}

fn sdp_weak_duality(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut worst = f64::NEG_INFINITY;
    for s in 0..5 {
        let cfg = SystemConfig::uniform(2, 3, 8, 5.0);
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let (lam, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default())?;
        let rp = build_reduced_problem(&ch, &lam, &cfg.gamma, cfg.sigma2, true)?;
        let sol = solve_sdp(&relaxation(&rp), SdpOptions::default())?;
        let r = &sol.report;
        for (p, d) in r.trajectory.iter().zip(&r.dual_trajectory) {
            worst = worst.max((d - p) / p.abs().max(1.0));
        }
    }
    Ok(vec![Check::at_most("sdp_weak_duality", worst, 1e-9)])
}

fn qcqp_monotone(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut rng = ChannelRng::new(seed ^ 0x9c9);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = 6;
        let m = DMatrix::from_fn(n, n, |_, _| rng.uniform() - 0.5);
        let q = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
        let lin = DVector::from_fn(n, |_, _| rng.uniform() - 0.5);
        let constraints = (0..3)
            .map(|_| {
                let c = DVector::from_fn(n, |_, _| 0.5 * (rng.uniform() - 0.5));
                // ‖x − c‖² ≤ 1 with ‖c‖ < 1, so x = 0 is strictly feasible.
                QuadConstraint::new(Quadratic::Dense(DMatrix::identity(n, n)), -&c, c.norm_squared() - 1.0)
            })
            .collect();
        let p = ConvexQcqp {
            n,
            objective: QuadConstraint::new(Quadratic::Dense(q), lin, 0.0),
            constraints,
        };
        let (_, rep) = solve_convex_qcqp(&p, Some(&DVector::zeros(n)), QcqpOptions::default())?;
        for w in rep.trajectory.windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0].abs().max(1.0));
        }
    }
    Ok(vec![Check::at_most("qcqp_monotone", worst, 1e-12)])
}

fn range_idempotence(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut rng = ChannelRng::new(seed ^ 0x4a);
    let mut worst: f64 = 0.0;
    for (n, k) in [(6, 3), (16, 5), (4, 4), (10, 1)] {
        let h = rand_cmat(&mut rng, n, k);
        let (u, r) = orthonormal_range(&h, 1e-10)?;
        let (u2, r2) = orthonormal_range(&u, 1e-10)?;
        let rank_change = if r == r2 { 0.0 } else { 1.0 };
        let proj_diff = (&u * u.adjoint() - &u2 * u2.adjoint()).norm();
        worst = worst.max(rank_change).max(proj_diff);
    }
    Ok(vec![Check::at_most("range_idempotence", worst, 1e-9)])
}

fn scenario_checks(seed: u64, _: f64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::uniform(2, 3, 20, 10.0);
    let a = gen_normalized_channels(&cfg, seed)?;
    let b = gen_normalized_channels(&cfg, seed)?;
    let (c, _) = gen_pathloss_channels(&cfg, seed)?;
    let (d, _) = gen_pathloss_channels(&cfg, seed)?;
    let same = if a == b && c == d { 0.0 } else { 1.0 };

    let pair = SystemConfig::uniform(1, 2, 500, 0.0);
    let mut acc = 0.0;
    for s in 0..200 {
        let ch = gen_normalized_channels(&pair, seed.wrapping_add(1000 + s))?;
        acc += ch.user(0, 0).dotc(&ch.user(0, 1)).norm() / 500.0;
    }
    Ok(vec![
        Check::at_most("rng_reproducibility", same, 0.0),
        Check::at_most("independence_proxy", acc / 200.0, 0.08),
    ])
}

fn max_rel(a: &BeamformerSet, b: &BeamformerSet) -> f64 {
    a.w.iter()
        .zip(&b.w)
        .map(|(x, y)| (x - y).norm() / x.norm().max(1e-300))
        .fold(0.0, f64::max)
}

fn assembly_checks(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut rng = ChannelRng::new(seed ^ 0xa55);
    let (mut form, mut scale, mut floor): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in 0..100u64 {
        let g = 1 + (s % 3) as usize;
        let k = 1 + (s % 4) as usize;
        let n = 2 + (s % 31) as usize;
        let cfg = SystemConfig::uniform(g, k, n, 10.0 * rng.uniform() - 2.0);
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let lam = rand_lambda(&mut rng, &ch);
        // R_{i⁻}⁻¹ H_i α_i equals R⁻¹ H_i a_i for a = α + λγ∘(H_iᴴ v_i).
        let alpha: Vec<CVec> = (0..g).map(|_| rand_cvec(&mut rng, k)).collect();
        let v = assemble_beamformer_interference(&lam, &alpha, &ch, &cfg.gamma)?;
        let d = delta(&v, &ch)?;
        let a: Vec<CVec> = (0..g)
            .map(|i| CVec::from_fn(k, |kk, _| alpha[i][kk] + d[i][kk] * (lam.lambda[i][kk] * cfg.gamma[i][kk])))
            .collect();
        let a = GroupWeights::new(a);
        let w = assemble_beamformer(&lam, &a, &ch, &cfg.gamma)?;
        form = form.max(max_rel(&v, &w));

        for c in [C64::new(2.5, 0.0), C64::new(0.3, -1.2)] {
            let wc = assemble_beamformer(&lam, &a.scaled(c), &ch, &cfg.gamma)?;
            let expect = BeamformerSet { w: w.w.iter().map(|x| x * c).collect() };
            scale = scale.max(max_rel(&expect, &wc));
        }
        floor = floor.max(1.0 - min_eigenvalue(&build_r(&lam, &ch, &cfg.gamma)?));
    }
    Ok(vec![
        Check::at_most("form_equivalence", form, 1e-8),
        Check::at_most("scale_covariance", scale, 1e-12),
        Check::at_most("r_eigen_floor", floor, 1e-10),
    ])
}

fn unicast_checks(seed: u64, corrupt: f64) -> Result<Vec<Check>> {
    let (mut gap, mut slack, mut ident, mut relation): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let (mut dual, mut dual_scale, mut dual_random): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    let mut rng = ChannelRng::new(seed ^ 0xd0a1);
    let cfg = SystemConfig::uniform(3, 1, 8, 5.0);
    for s in 0..10 {
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let (w, lam) = unicast_reference(&ch, &cfg.gamma, cfg.sigma2)?;
        let p = total_power(&w);
        let (lb, _) = qos_lower_bound(&ch, &cfg, SdpOptions::default())?;
        gap = gap.max((p - lb).abs() / lb);
        let s_ik = sinr(&w, &ch, cfg.sigma2)?;
        for (row, g) in s_ik.iter().zip(&cfg.gamma) {
            for (x, t) in row.iter().zip(g) {
                slack = slack.max((x / t - 1.0).abs());
            }
        }
        let reported = p * (1.0 + corrupt);
        let id = cfg.sigma2 * lam.dot_gamma(&cfg.gamma);
        ident = ident.max((reported - id).abs() / reported);

        // a = λδ(1+γ) from w, assembled, then recomputed from the new w.
        let a = stationary_weights(&w, &lam, &ch, &cfg.gamma)?;
        let w2 = assemble_beamformer(&lam, &a, &ch, &cfg.gamma)?;
        let a2 = stationary_weights(&w2, &lam, &ch, &cfg.gamma)?;
        for (x, y) in a.a.iter().zip(&a2.a) {
            relation = relation.max((x - y).norm() / x.norm());
        }

        let base = duality_check(&w, &lam, &ch, &cfg.gamma)?;
        dual = base.iter().copied().fold(dual, f64::max);
        let scaled = BeamformerSet { w: w.w.iter().map(|x| x * C64::new(-0.4, 2.0)).collect() };
        for (x, y) in duality_check(&scaled, &lam, &ch, &cfg.gamma)?.iter().zip(&base) {
            dual_scale = dual_scale.max((x - y).abs());
        }
        let random = BeamformerSet { w: (0..cfg.groups()).map(|_| rand_cvec(&mut rng, cfg.n)).collect() };
        dual_random = duality_check(&random, &lam, &ch, &cfg.gamma)?.into_iter().fold(dual_random, f64::min);
    }
    Ok(vec![
        Check::at_most("unicast_consistency", gap, 1e-4),
        Check::at_most("unicast_active_constraints", slack, 1e-8),
        Check::at_most("power_identity", ident, 1e-6),
        Check::at_most("weight_relation", relation, 1e-8),
        Check::at_most("duality_check", dual, 1e-8),
        Check::at_most("duality_scale_invariance", dual_scale, 1e-8),
        Check::at_least("duality_random_nonzero", dual_random, 1e-3),
    ])
}

fn lambda_checks(seed: u64, _: f64) -> Result<Vec<Check>> {
    let mut min_l = f64::INFINITY;
    let mut cert: f64 = 0.0;
    for (s, n) in [50usize, 100, 200].into_iter().enumerate() {
        let cfg = SystemConfig::uniform(3, 5, n, 10.0);
        let (ch, _) = gen_pathloss_channels(&cfg, seed.wrapping_add(s as u64))?;
        for damping in [1.0, 0.5] {
            let opts = LambdaOptions { damping, ..Default::default() };
            let (lam, rep) = fixed_point_lambda(&ch, &cfg.gamma, opts)?;
            min_l = lam.flat().into_iter().fold(min_l, f64::min);
            cert = cert.max((fixed_point_residual(&lam, &ch, &cfg.gamma)? - rep.residual).abs());
        }
    }
    Ok(vec![
        Check::at_least("lambda_positivity", min_l, f64::MIN_POSITIVE),
        Check::at_most("lambda_certificate", cert, 1e-12),
    ])
}

fn cross_term_decay(seed: u64, _: f64) -> Result<Vec<Check>> {
    let means = [50usize, 200, 500]
        .iter()
        .map(|&n| {
            let cfg = SystemConfig::uniform(3, 5, n, 10.0);
            let per: Vec<f64> = (0..100u64)
                .into_par_iter()
                .map(|t| -> Result<f64> {
                    let ch = gen_normalized_channels(&cfg, seed.wrapping_add(t))?;
                    let (lam, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default())?;
                    let e = cross_terms(&lam, &ch, &cfg.gamma)?;
                    Ok(e.iter().sum::<f64>() / e.len() as f64)
                })
                .collect::<Result<_>>()?;
            Ok(per.iter().sum::<f64>() / per.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let increase = means.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Check::at_most("cross_term_mean_n500", means[2], 0.15),
        Check::at_most("cross_term_increase", increase, 0.0),
    ])
}

fn cdf_concentration(seed: u64, _: f64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::uniform(3, 5, 500, 10.0);
    let mut v = Vec::new();
    for s in 0..20 {
        let (ch, _) = gen_pathloss_channels(&cfg, seed.wrapping_add(s))?;
        let (lam, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default())?;
        for (l, b) in lam.lambda.iter().flatten().zip(ch.beta.iter().flatten()) {
            v.push(l * b);
        }
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    Ok(vec![Check::at_most("cdf_concentration", (q(0.75) - q(0.25)) / q(0.5), 0.1)])
}

fn weight_checks(seed: u64, _: f64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::uniform(3, 5, 32, 10.0);
    let (mut sandwich, mut feas): (f64, f64) = (0.0, 0.0);
    for s in 0..10 {
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let opts = QosOptions { seed: s, ..Default::default() };
        let sdr = solve_qos(&ch, &cfg, QosMethod::OptSdr, opts)?;
        let sca = solve_qos(&ch, &cfg, QosMethod::OptSca, opts)?;
        let v1 = (sdr.lower_bound - sca.power) / sca.power;
        let v2 = (sca.power - sdr.power) / sdr.power;
        sandwich = sandwich.max(v1).max(v2);
        for sol in [&sdr, &sca] {
            let r = min_sinr_ratio(&sol.solution.w, &ch, &cfg.gamma, cfg.sigma2)?;
            feas = feas.max(1.0 - r);
        }
    }
    let mut excess = 0usize;
    for n in [50, 500] {
        let big = SystemConfig { n, ..cfg.clone() };
        let ch = gen_normalized_channels(&big, seed)?;
        let (lam, _) = fixed_point_lambda(&ch, &big.gamma, LambdaOptions::default())?;
        let rp = build_reduced_problem(&ch, &lam, &big.gamma, big.sigma2, true)?;
        excess += rp.dims().iter().sum::<usize>().saturating_sub(big.k_tot());
    }
    let ch = gen_normalized_channels(&cfg, seed)?;
    let (lam, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default())?;
    let rp = build_reduced_problem(&ch, &lam, &cfg.gamma, cfg.sigma2, true)?;
    let a = solve_weights_sdr(&rp, 100, seed)?;
    let b = solve_weights_sdr(&rp, 100, seed)?;
    let same = if a.coords == b.coords { 0.0 } else { 1.0 };
    Ok(vec![
        Check::at_most("weight_sandwich", sandwich, 1e-7),
        Check::at_most("weight_feasibility", feas, SINR_SLACK),
        Check::at_most("reduced_dimension", excess as f64, 0.0),
        Check::at_most("randomization_determinism", same, 0.0),
    ])
}

fn structure_validation(seed: u64, _: f64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::uniform(3, 5, 200, 10.0);
    let per: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let ch = gen_normalized_channels(&cfg, seed.wrapping_add(t))?;
            let opts = DirectOptions::auto(cfg.n);
            let sdr = direct_sdr_qos(&ch, &cfg, 300, t, opts)?;
            let (w, _) = direct_sca_qos(&ch, &cfg, &sdr.w, opts)?;
            let (lam, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default())?;
            let r = structure_residual(&w, &lam, &ch, &cfg.gamma)?;
            Ok(r.iter().sum::<f64>() / r.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(vec![Check::at_most("structure_validation", per.iter().sum::<f64>() / per.len() as f64, 0.1)])
}

fn direct_sandwich(seed: u64, _: f64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::uniform(3, 5, 100, 10.0);
    let (mut below, mut order) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in 0..10 {
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let (lb, _) = qos_lower_bound(&ch, &cfg, SdpOptions::default())?;
        let sca = solve_qos(&ch, &cfg, QosMethod::OptSca, QosOptions { seed: s, ..Default::default() })?;
        let d = direct_sdr_qos(&ch, &cfg, 300, s, DirectOptions::auto(cfg.n))?;
        let pd = total_power(&d.w);
        below = below.max((lb - sca.power) / sca.power);
        order = order.max((sca.power - pd) / pd);
    }
    // The relaxation is close to tight at this N, so the direct extraction
    // often lands within a fraction of a percent of the bound and below the
    // structured SCA point; the ordering is reported, not enforced.
    Ok(vec![
        Check::at_most("direct_lower_bound", below, 1e-7),
        Check::at_most("direct_extraction_order", order, 1e-7).advisory(),
    ])
}

fn mmf_checks(seed: u64, _: f64) -> Result<Vec<Check>> {
    let opts = QosOptions { n_rand: 100, ..Default::default() };
    let tol = 1e-4;
    let (mut trip, mut power, mut ratio, mut mono, mut covariance): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in 0..5 {
        let cfg = SystemConfig::uniform(2, 2, 8, 3.0);
        let ch = gen_normalized_channels(&cfg, seed.wrapping_add(s))?;
        let sol = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSca, tol, opts)?;
        let back = solve_qos(&ch, &cfg.with_scaled_targets(sol.t), QosMethod::OptSca, opts)?;
        trip = trip.max((back.power - cfg.p).abs() / cfg.p);

        let sdr = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSdr, tol, opts)?;
        let cf = cf_asym_mmf(&ch, &cfg)?;
        let cf_t = min_sinr_ratio(&cf, &ch, &cfg.gamma, cfg.sigma2)?;
        for (w, t) in [(&sol.w, sol.t), (&sdr.w, sdr.t), (&cf, cf_t)] {
            power = power.max(total_power(w) / cfg.p - 1.0);
            let r = min_sinr_ratio(w, &ch, &cfg.gamma, cfg.sigma2)?;
            ratio = ratio.max((r - t).abs() / t);
        }

        // Larger budget never lowers t; a larger target never raises it.
        let mut hi_p = cfg.clone();
        hi_p.p *= 2.0;
        let t_hi_p = solve_mmf_bisection(&ch, &hi_p, QosMethod::OptSca, tol, opts)?.t;
        let mut hi_g = cfg.clone();
        hi_g.gamma[0][0] *= 2.0;
        let t_hi_g = solve_mmf_bisection(&ch, &hi_g, QosMethod::OptSca, tol, opts)?.t;
        mono = mono.max((sol.t - t_hi_p) / sol.t).max((t_hi_g - sol.t) / sol.t);

        // With P set to the probe's identity power σ²λᵀ(tγ), R̃ equals the
        // probe's R(λ) and the assembled direction is the probe's direction.
        let lam = sol.lambda.as_ref().expect("bisection keeps multipliers");
        let a = sol.weights.as_ref().expect("bisection keeps weights");
        let mut probe_cfg = cfg.with_scaled_targets(sol.t_probe);
        probe_cfg.p = probe_cfg.sigma2 * lam.dot_gamma(&probe_cfg.gamma);
        let (w, _) = assemble_mmf(lam, a, &ch, &probe_cfg)?;
        for (x, y) in w.w.iter().zip(&sol.w.w) {
            covariance = covariance.max(sine(x, y));
        }
    }
    Ok(vec![
        Check::at_most("mmf_round_trip", trip, 1e-2),
        Check::at_most("mmf_power_compliance", power, 1e-8),
        Check::at_most("mmf_ratio_exact", ratio, 1e-9),
        Check::at_most("mmf_monotone", mono, 2.0 * tol),
        Check::at_most("mmf_covariance_consistency", covariance, 1e-6),
    ])
}
