use mcbf_core::lambda::{fixed_point_lambda, fixed_point_residual, LambdaOptions};
use mcbf_core::numerics::linalg::min_eigenvalue;
use mcbf_core::numerics::{orthonormal_range, CMat, CVec, C64};
use mcbf_core::qos::{
    assemble_beamformer, assemble_beamformer_interference, build_r, delta, is_feasible, sinr, total_power,
    unicast_reference, BeamformerSet, DualMultipliers, GroupWeights,
};
use mcbf_core::scenario::{gen_normalized_channels, ChannelRng, ChannelSet, GammaDb, Scenario, ScenarioFile, SystemConfig};
use mcbf_core::weights::{solve_qos, QosMethod, QosOptions};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    // (G, K, N, seed)
    (1usize..=3, 1usize..=3, 2usize..=10, any::<u64>())
}

fn random_lambda(rng: &mut ChannelRng, ch: &ChannelSet) -> DualMultipliers {
    DualMultipliers {
        lambda: ch.k().iter().map(|&k| (0..k).map(|_| rng.uniform()).collect()).collect(),
    }
}

fn random_vecs(rng: &mut ChannelRng, dims: &[usize]) -> Vec<CVec> {
    dims.iter().map(|&d| CVec::from_fn(d, |_, _| rng.complex_gaussian())).collect()
}

fn max_rel_diff(a: &BeamformerSet, b: &BeamformerSet) -> f64 {
    a.w.iter()
        .zip(&b.w)
        .map(|(x, y)| (x - y).norm() / x.norm().max(1e-300))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interference_form_matches_assembled_form((g, k, n, seed) in shape(), gamma_db in -5.0f64..15.0) {
        // v_i = R_{i⁻}⁻¹ H_i α_i equals R⁻¹ H_i a_i with a = α + λγ∘(H_iᴴ v_i).
        let cfg = SystemConfig::uniform(g, k, n, gamma_db);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let mut rng = ChannelRng::new(seed ^ 0x5eed);
        let lam = random_lambda(&mut rng, &ch);
        let alpha = random_vecs(&mut rng, &ch.k());
        let v = assemble_beamformer_interference(&lam, &alpha, &ch, &cfg.gamma).unwrap();
        let d = delta(&v, &ch).unwrap();
        let a: Vec<CVec> = (0..g)
            .map(|i| CVec::from_fn(k, |kk, _| alpha[i][kk] + d[i][kk] * (lam.lambda[i][kk] * cfg.gamma[i][kk])))
            .collect();
        let w = assemble_beamformer(&lam, &GroupWeights::new(a), &ch, &cfg.gamma).unwrap();
        prop_assert!(max_rel_diff(&v, &w) <= 1e-9);
    }

    #[test]
    fn covariance_eigenvalues_are_at_least_one((g, k, n, seed) in shape()) {
        let cfg = SystemConfig::uniform(g, k, n, 10.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let mut rng = ChannelRng::new(seed.wrapping_add(1));
        let lam = random_lambda(&mut rng, &ch);
        let r = build_r(&lam, &ch, &cfg.gamma).unwrap();
        prop_assert!(min_eigenvalue(&r) >= 1.0 - 1e-10);
    }

    #[test]
    fn orthonormal_range_is_idempotent(n in 2usize..12, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChannelRng::new(seed);
        let h = CMat::from_fn(n, k, |_, _| rng.complex_gaussian());
        let (u, r) = orthonormal_range(&h, 1e-10).unwrap();
        prop_assert_eq!(r, k.min(n));
        let (u2, r2) = orthonormal_range(&u, 1e-10).unwrap();
        prop_assert_eq!(r2, r);
        let p1 = &u * u.adjoint();
        let p2 = &u2 * u2.adjoint();
        prop_assert!((&p1 - &p2).norm() <= 1e-10 * (r as f64).sqrt());
        prop_assert!((&p1 * &p1 - &p1).norm() <= 1e-10 * (r as f64).sqrt());
    }

    #[test]
    fn sinr_is_invariant_to_joint_rescaling((g, k, n, seed) in shape(), s in 0.01f64..100.0) {
        // Scaling all beamformers by s and the noise by s² leaves every SINR unchanged.
        let cfg = SystemConfig::uniform(g, k, n, 0.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let mut rng = ChannelRng::new(seed ^ 7);
        let w = BeamformerSet { w: random_vecs(&mut rng, &vec![n; g]) };
        let a = sinr(&w, &ch, 0.7).unwrap();
        let b = sinr(&w.scaled(s), &ch, 0.7 * s * s).unwrap();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1e-12));
        }
    }

    #[test]
    fn fixed_point_multipliers_are_positive((g, k, seed) in (1usize..=3, 1usize..=4, any::<u64>()), gamma_db in 0.0f64..10.0) {
        let n = 4 * g * k + 4;
        let cfg = SystemConfig::uniform(g, k, n, gamma_db);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let (lam, rep) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default()).unwrap();
        prop_assert!(lam.lambda.iter().flatten().all(|&l| l > 0.0 && l.is_finite()));
        prop_assert!(fixed_point_residual(&lam, &ch, &cfg.gamma).unwrap() <= 1e-9);
        prop_assert!(rep.is_optimal());
    }

    #[test]
    fn multipliers_ignore_channel_phases((g, k, seed) in (1usize..=3, 1usize..=3, any::<u64>()), theta in 0.0f64..std::f64::consts::TAU) {
        let n = 3 * g * k + 2;
        let cfg = SystemConfig::uniform(g, k, n, 5.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let rotated = ChannelSet::new(
            ch.h.iter().map(|h| h * C64::from_polar(1.0, theta)).collect(),
            ch.beta.clone(),
        ).unwrap();
        let (a, _) = fixed_point_lambda(&ch, &cfg.gamma, LambdaOptions::default()).unwrap();
        let (b, _) = fixed_point_lambda(&rotated, &cfg.gamma, LambdaOptions::default()).unwrap();
        for (x, y) in a.flat().iter().zip(b.flat()) {
            prop_assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn scenario_json_round_trips(g in 1usize..4, n in 1usize..300, seed in any::<u64>(), db in -20.0f64..20.0, p in 0.1f64..100.0) {
        let file = ScenarioFile {
            g,
            k: (0..g).map(|i| i + 1).collect(),
            n,
            gamma_db: GammaDb::Common(db),
            sigma2: 1.0,
            p,
            channel_model: mcbf_core::scenario::ChannelModel::Pathloss,
            seed,
            channels: None,
        };
        let sc = Scenario::from_file(file).unwrap();
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        prop_assert_eq!(back, sc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relaxation_bound_sits_below_feasible_powers((g, k, seed) in (2usize..=3, 2usize..=3, any::<u64>()), n in 6usize..14) {
        let cfg = SystemConfig::uniform(g, k, n, 3.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let opts = QosOptions { n_rand: 60, seed, ..Default::default() };
        let sdr = solve_qos(&ch, &cfg, QosMethod::OptSdr, opts).unwrap();
        let sca = solve_qos(&ch, &cfg, QosMethod::OptSca, opts).unwrap();
        for sol in [&sdr, &sca] {
            prop_assert!(is_feasible(&sol.solution.w, &ch, &cfg.gamma, cfg.sigma2).unwrap());
            prop_assert!((total_power(&sol.solution.w) - sol.power).abs() <= 1e-9 * sol.power);
            prop_assert!(sol.lower_bound <= sol.power * (1.0 + 1e-7));
        }
        // SCA only accepts non-increasing iterates and starts from the SDR point.
        prop_assert!(sca.power <= sdr.power * (1.0 + 1e-9));
        prop_assert!(sca.report.trajectory.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn power_scales_with_noise((g, seed) in (1usize..=3, any::<u64>()), c in 0.1f64..10.0) {
        let mut cfg = SystemConfig::uniform(g, 2, 8, 5.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let opts = QosOptions { n_rand: 40, seed, ..Default::default() };
        let base = solve_qos(&ch, &cfg, QosMethod::OptSdr, opts).unwrap();
        cfg.sigma2 = c;
        let scaled = solve_qos(&ch, &cfg, QosMethod::OptSdr, opts).unwrap();
        prop_assert!((scaled.lower_bound - c * base.lower_bound).abs() <= 1e-6 * c * base.lower_bound);
    }

    #[test]
    fn unicast_power_equals_multiplier_identity((g, seed) in (1usize..=4, any::<u64>()), n in 6usize..16) {
        let cfg = SystemConfig::uniform(g, 1, n, 5.0);
        let ch = gen_normalized_channels(&cfg, seed).unwrap();
        let (w, lam) = unicast_reference(&ch, &cfg.gamma, cfg.sigma2).unwrap();
        let p = total_power(&w);
        let ident = cfg.sigma2 * lam.dot_gamma(&cfg.gamma);
        prop_assert!((p - ident).abs() <= 1e-6 * p);
        let sol = solve_qos(&ch, &cfg, QosMethod::OptSca, QosOptions { n_rand: 20, ..Default::default() }).unwrap();
        prop_assert!((sol.power - p).abs() <= 1e-5 * p);
    }
}
