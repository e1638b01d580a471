use mcbf_core::direct::{direct_sca_qos, direct_sdr_qos, DirectOptions};
use mcbf_core::mmf::{asym_mmf_sca, assemble_mmf, cf_asym_mmf, mmf_upper_bound, solve_mmf_bisection, DEFAULT_TOL_T};
use mcbf_core::qos::{is_feasible, min_sinr_ratio, structure_residual, total_power, unicast_reference};
use mcbf_core::scenario::{gen_normalized_channels, gen_pathloss_channels, SystemConfig};
use mcbf_core::weights::{solve_qos, QosMethod, QosOptions};
use mcbf_core::Error;

fn quick() -> QosOptions {
    QosOptions {
        n_rand: 100,
        ..Default::default()
    }
}

#[test]
fn all_qos_methods_match_unicast_reference() {
    // K_i = 1 and a small target so that the closed-form multipliers exist.
    let cfg = SystemConfig::uniform(3, 1, 12, 0.0);
    for seed in 0..3 {
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let (w_ref, _) = unicast_reference(&ch, &cfg.gamma, cfg.sigma2).unwrap();
        let p_ref = total_power(&w_ref);
        for m in [QosMethod::OptSdr, QosMethod::OptSca] {
            let sol = solve_qos(&ch, &cfg, m, quick()).unwrap();
            assert!((sol.power - p_ref).abs() <= 1e-5 * p_ref, "{m:?}: {} vs {p_ref}", sol.power);
        }
        // The closed-form λ is only asymptotically optimal; it can never beat the optimum.
        let asym = solve_qos(&ch, &cfg, QosMethod::AsymSca, quick()).unwrap();
        assert!(is_feasible(&asym.solution.w, &ch, &cfg.gamma, cfg.sigma2).unwrap());
        assert!(asym.power >= p_ref * (1.0 - 1e-6));
    }
}

#[test]
fn lower_bounds_sandwich_the_powers() {
    let cfg = SystemConfig::uniform(2, 3, 10, 6.0);
    for seed in 0..3 {
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let d = direct_sdr_qos(&ch, &cfg, 200, seed, DirectOptions::default()).unwrap();
        let (w_sca, _) = direct_sca_qos(&ch, &cfg, &d.w, DirectOptions::default()).unwrap();
        for w in [&d.w, &w_sca] {
            assert!(is_feasible(w, &ch, &cfg.gamma, cfg.sigma2).unwrap());
            assert!(d.lower_bound <= total_power(w) * (1.0 + 1e-7));
        }
        for m in [QosMethod::OptSdr, QosMethod::OptSca] {
            let sol = solve_qos(&ch, &cfg, m, quick()).unwrap();
            assert!(d.lower_bound <= sol.power * (1.0 + 1e-7), "{m:?}");
            assert!(sol.lower_bound <= sol.power * (1.0 + 1e-7));
            // The structured solution has the structured form exactly.
            let res = structure_residual(&sol.solution.w, &sol.solution.lambda, &ch, &cfg.gamma).unwrap();
            assert!(res.iter().all(|r| *r <= 1e-8), "{res:?}");
        }
    }
}

#[test]
fn structured_solutions_are_deterministic() {
    let cfg = SystemConfig::uniform(2, 2, 8, 5.0);
    let ch = gen_normalized_channels(&cfg, 4).unwrap();
    for m in [QosMethod::OptSdr, QosMethod::OptSca] {
        let a = solve_qos(&ch, &cfg, m, quick()).unwrap();
        let b = solve_qos(&ch, &cfg, m, quick()).unwrap();
        assert_eq!(a.solution.w, b.solution.w);
        assert_eq!(a.power.to_bits(), b.power.to_bits());
    }
    let again = gen_normalized_channels(&cfg, 4).unwrap();
    assert_eq!(ch, again);
}

#[test]
fn infeasible_targets_are_reported() {
    // Two groups sharing the same single-antenna channel cannot both reach 10 dB.
    let cfg = SystemConfig::uniform(2, 1, 1, 10.0);
    let ch = gen_normalized_channels(&cfg, 0).unwrap();
    let ch = mcbf_core::scenario::ChannelSet::new(vec![ch.h[0].clone(), ch.h[0].clone()], ch.beta.clone()).unwrap();
    // The multiplier iteration has no fixed point here and runs away.
    let err = solve_qos(&ch, &cfg, QosMethod::OptSdr, quick()).unwrap_err();
    assert!(err.is_infeasibility() || matches!(err, Error::IterLimit(_)), "{err:?}");
    let err = direct_sdr_qos(&ch, &cfg, 10, 0, DirectOptions::default()).unwrap_err();
    assert!(err.is_infeasibility(), "{err:?}");
}

#[test]
fn mmf_solutions_use_the_budget_and_respect_the_bound() {
    let mut cfg = SystemConfig::uniform(2, 3, 12, 0.0);
    cfg.p = 10.0;
    let ch = gen_normalized_channels(&cfg, 7).unwrap();
    let (ub, _) = mmf_upper_bound(&ch, &cfg, DEFAULT_TOL_T).unwrap();
    let sdr = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSdr, DEFAULT_TOL_T, quick()).unwrap();
    let sca = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSca, DEFAULT_TOL_T, quick()).unwrap();
    let cf = cf_asym_mmf(&ch, &cfg).unwrap();
    for (name, w, t) in [
        ("sdr", &sdr.w, sdr.t),
        ("sca", &sca.w, sca.t),
        ("cf", &cf, min_sinr_ratio(&cf, &ch, &cfg.gamma, cfg.sigma2).unwrap()),
    ] {
        assert!((total_power(w) - cfg.p).abs() <= 1e-9 * cfg.p, "{name}");
        let ratio = min_sinr_ratio(w, &ch, &cfg.gamma, cfg.sigma2).unwrap();
        assert!((ratio - t).abs() <= 1e-9 * t, "{name}");
        assert!(t <= ub * (1.0 + 1e-6), "{name}: {t} above bound {ub}");
    }
    assert!(sca.t >= sdr.t * (1.0 - 2.0 * DEFAULT_TOL_T));
}

#[test]
fn mmf_round_trips_through_qos() {
    // The QoS power at the MMF targets t·γ is the budget P, up to the bisection tolerance.
    let cfg = SystemConfig::uniform(2, 2, 10, 0.0);
    let ch = gen_normalized_channels(&cfg, 11).unwrap();
    let mmf = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSca, 1e-4, quick()).unwrap();
    let qos = solve_qos(&ch, &cfg.with_scaled_targets(mmf.t), QosMethod::OptSca, quick()).unwrap();
    assert!((qos.power - cfg.p).abs() <= 2e-3 * cfg.p, "{} vs {}", qos.power, cfg.p);

    let lam = mmf.lambda.as_ref().unwrap();
    let a = mmf.weights.as_ref().unwrap();
    let (w, t_formula) = assemble_mmf(lam, a, &ch, &cfg).unwrap();
    assert!((total_power(&w) - cfg.p).abs() <= 1e-9 * cfg.p);
    assert!(t_formula > 0.0);
}

#[test]
fn mmf_value_grows_with_budget() {
    let mut cfg = SystemConfig::uniform(2, 2, 8, 0.0);
    let ch = gen_normalized_channels(&cfg, 3).unwrap();
    let mut last = 0.0;
    for p in [1.0, 3.0, 10.0, 30.0] {
        cfg.p = p;
        let sol = solve_mmf_bisection(&ch, &cfg, QosMethod::OptSca, 1e-4, quick()).unwrap();
        assert!(sol.t > last, "P = {p}: {} after {last}", sol.t);
        last = sol.t;
    }
}

#[test]
fn asymptotic_mmf_runs_on_pathloss_channels() {
    let mut cfg = SystemConfig::uniform(2, 2, 24, 0.0);
    cfg.p = 10.0;
    let (ch, _) = gen_pathloss_channels(&cfg, 2).unwrap();
    let asym = asym_mmf_sca(&ch, &cfg, DEFAULT_TOL_T, quick()).unwrap();
    let (ub, _) = mmf_upper_bound(&ch, &cfg, DEFAULT_TOL_T).unwrap();
    assert!((total_power(&asym.w) - cfg.p).abs() <= 1e-9 * cfg.p);
    assert!(asym.t <= ub * (1.0 + 1e-6));
    let cf = cf_asym_mmf(&ch, &cfg).unwrap();
    assert!(min_sinr_ratio(&cf, &ch, &cfg.gamma, cfg.sigma2).unwrap() <= ub * (1.0 + 1e-6));
}

#[test]
fn asymptotic_methods_reject_unequal_targets() {
    let mut cfg = SystemConfig::uniform(2, 2, 24, 0.0);
    cfg.gamma[1][0] = 2.0;
    let ch = gen_normalized_channels(&cfg, 0).unwrap();
    assert!(matches!(cf_asym_mmf(&ch, &cfg), Err(Error::UnequalTargets)));
}
