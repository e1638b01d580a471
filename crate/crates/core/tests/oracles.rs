//! Solver outputs checked against independent brute-force computations.

mod support;

use mcbf_core::direct::{direct_sca_qos, direct_sdr_qos, DirectOptions};
use mcbf_core::numerics::{hermitian_solve, orthonormal_range, CMat, CVec, C64};
use mcbf_core::qos::{build_r, is_feasible, sinr, total_power, BeamformerSet, DualMultipliers};
use mcbf_core::scenario::{gen_normalized_channels, gen_pathloss_channels, pathloss_constant, ChannelRng, ChannelSet, SystemConfig};
use mcbf_core::weights::{solve_qos, QosMethod, QosOptions};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_cmat(rng: &mut ChannelRng, r: usize, k: usize) -> CMat {
    CMat::from_fn(r, k, |_, _| rng.complex_gaussian())
}

#[test]
fn hermitian_solve_multiplies_back() {
    let mut rng = ChannelRng::new(1);
    for _ in 0..20 {
        let m = random_cmat(&mut rng, 6, 6);
        let a = m.adjoint() * &m + CMat::identity(6, 6);
        let b = random_cmat(&mut rng, 6, 3);
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-10 * b.norm());
    }
}

#[test]
fn orthonormal_range_projects_channels() {
    let mut rng = ChannelRng::new(2);
    for (n, k) in [(8, 3), (20, 5), (5, 5)] {
        let h = random_cmat(&mut rng, n, k);
        let (u, r) = orthonormal_range(&h, 1e-10).unwrap();
        assert_eq!(r, k);
        assert!((u.adjoint() * &u - CMat::identity(r, r)).norm() <= 1e-10);
        let resid = &h - &u * (u.adjoint() * &h);
        assert!(resid.norm() <= 1e-9 * h.norm());
    }
}

#[test]
fn covariance_matches_naive_accumulation() {
    let cfg = SystemConfig::uniform(2, 3, 7, 4.0);
    let ch = gen_normalized_channels(&cfg, 3).unwrap();
    let lam = DualMultipliers {
        lambda: vec![vec![0.3, 0.05, 1.2], vec![0.7, 0.0, 0.2]],
    };
    let r = build_r(&lam, &ch, &cfg.gamma).unwrap();
    let mut naive = CMat::identity(7, 7);
    for i in 0..2 {
        for k in 0..3 {
            let h = ch.user(i, k);
            for a in 0..7 {
                for b in 0..7 {
                    naive[(a, b)] += h[a] * h[b].conj() * (lam.lambda[i][k] * cfg.gamma[i][k]);
                }
            }
        }
    }
    let diff = (&r - &naive).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(diff <= 1e-12 * (1.0 + naive.norm()), "{diff}");
}

#[test]
fn sinr_matches_hand_computation() {
    // Two groups, one user each, N = 2.
    let h1 = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
    let h2 = CMat::from_column_slice(2, 1, &[c(0.5, 0.0), c(1.0, 0.0)]);
    let ch = ChannelSet::new(vec![h1, h2], vec![vec![1.0], vec![1.0]]).unwrap();
    let w = BeamformerSet {
        w: vec![
            CVec::from_column_slice(&[c(1.0, 0.0), c(1.0, 0.0)]),
            CVec::from_column_slice(&[c(0.0, 0.0), c(2.0, 0.0)]),
        ],
    };
    // w1ᴴh1 = 1 + i → 2; w2ᴴh1 = 2i → 4; w2ᴴh2 = 2 → 4; w1ᴴh2 = 1.5 → 2.25.
    let s = sinr(&w, &ch, 0.5).unwrap();
    assert!((s[0][0] - 2.0 / 4.5).abs() < 1e-14);
    assert!((s[1][0] - 4.0 / 2.75).abs() < 1e-14);
}

/// Brute-force minimum of a convex QCQP over a box: a coarse grid, then
/// repeated refinement around the incumbent down to step 1e-3.
#[test]
fn qcqp_matches_grid_search() {
    for (i, t) in support::qcqp_trials().iter().enumerate() {
        assert!(t.max_violation <= 1e-8, "trial {i}: violation {}", t.max_violation);
        assert!(t.solver <= t.grid + 1e-8, "trial {i}: solver {} above grid {}", t.solver, t.grid);
        assert!((t.solver - t.grid).abs() <= 1e-2, "trial {i}: solver {}, grid {}", t.solver, t.grid);
    }
}

#[test]
fn sdp_matches_rank_one_grid() {
    for (i, t) in support::sdp_trials().iter().enumerate() {
        assert!(t.gap <= 1e-7, "trial {i}: gap {}", t.gap);
        assert!((t.primal - t.grid).abs() / t.grid <= 1e-2, "trial {i}: sdp {} grid {}", t.primal, t.grid);
        assert!(t.dual <= t.grid * (1.0 + 1e-7), "trial {i}");
    }
}

#[test]
fn power_scaling_matches_grid() {
    for (i, t) in support::scaling_trials().iter().enumerate() {
        assert!(t.grid.is_finite(), "trial {i}: grid too small");
        assert!(t.solver <= t.grid + 1e-12, "trial {i}");
        assert!((t.solver - t.grid) / t.grid <= 1e-2, "trial {i}: {} vs {}", t.solver, t.grid);
    }
}

/// `min ‖w‖²` s.t. `|wᴴh_k|² ≥ γσ²` over `w ∈ C²`: unit directions
/// `(cos θ, sin θ e^{iφ})` on a grid of step 1e-2, each scaled to the
/// smallest feasible power.
fn single_group_grid(h: &CMat, gamma: &[f64], sigma2: f64) -> f64 {
    let mut best = f64::INFINITY;
    let nt = (std::f64::consts::FRAC_PI_2 / 1e-2).ceil() as usize;
    let np = (2.0 * std::f64::consts::PI / 1e-2).ceil() as usize;
    for i in 0..=nt {
        let th = i as f64 * 1e-2;
        for j in 0..np {
            let ph = j as f64 * 1e-2;
            let u = CVec::from_column_slice(&[c(th.cos(), 0.0), C64::from_polar(th.sin(), ph)]);
            let mut need: f64 = 0.0;
            for (k, g) in gamma.iter().enumerate() {
                let gain = u.dotc(&h.column(k).into_owned()).norm_sqr();
                need = need.max(g * sigma2 / gain);
            }
            best = best.min(need);
        }
    }
    best
}

#[test]
fn single_group_two_antennas_match_grid() {
    for seed in 0..5 {
        let mut cfg = SystemConfig::uniform(1, 2, 2, 3.0);
        cfg.sigma2 = 1.0;
        let ch = gen_normalized_channels(&cfg, 100 + seed).unwrap();
        let oracle = single_group_grid(&ch.h[0], &cfg.gamma[0], cfg.sigma2);
        let within = |p: f64, what: &str| {
            assert!((p - oracle).abs() <= 1e-2 * oracle, "seed {seed} {what}: {p} vs grid {oracle}");
        };
        for method in [QosMethod::OptSdr, QosMethod::OptSca] {
            let sol = solve_qos(&ch, &cfg, method, QosOptions::default()).unwrap();
            assert!(is_feasible(&sol.solution.w, &ch, &cfg.gamma, cfg.sigma2).unwrap());
            within(sol.power, &format!("{method:?}"));
        }
        let d = direct_sdr_qos(&ch, &cfg, 300, seed, DirectOptions::default()).unwrap();
        within(total_power(&d.w), "direct SDR");
        assert!(d.lower_bound <= oracle * (1.0 + 1e-7));
        let (w, _) = direct_sca_qos(&ch, &cfg, &d.w, DirectOptions::default()).unwrap();
        within(total_power(&w), "direct SCA");
    }
}

#[test]
fn normalized_entries_have_unit_variance() {
    let cfg = SystemConfig::uniform(1, 1, 10_000, 0.0);
    let ch = gen_normalized_channels(&cfg, 5).unwrap();
    let samples: Vec<f64> = ch.h[0].iter().map(|z| z.norm_sqr()).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    // |h|² is Exp(1): standard deviation 1.
    assert!((mean - 1.0).abs() <= 3.0 / (samples.len() as f64).sqrt(), "{mean}");
}

#[test]
fn pathloss_distances_follow_annulus_law() {
    // Distances implied by β = ξ d⁻³ are uniform over the annulus area:
    // F(d) = (d² − 0.01) / 0.99. One-sample Kolmogorov–Smirnov at 1%.
    let cfg = SystemConfig::uniform(1, 100, 4, 0.0);
    let xi = pathloss_constant(cfg.sigma2);
    let mut d = Vec::new();
    for seed in 0..100 {
        let (ch, dist) = gen_pathloss_channels(&cfg, seed).unwrap();
        for (b, di) in ch.beta[0].iter().zip(&dist[0]) {
            let implied = (xi / b).cbrt();
            assert!((implied - di).abs() <= 1e-12 * di);
            d.push(implied);
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let ks = d
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x * x - 0.01) / 0.99;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 1.63 / n.sqrt(), "KS statistic {ks}");
    assert!(d[0] >= 0.1 && d[d.len() - 1] <= 1.0);
}

#[test]
fn edge_user_snr_is_minus_five_db() {
    let xi = pathloss_constant(1.0);
    assert!((xi - 10f64.powf(-0.5)).abs() < 1e-15);
    // β at d = 1 is ξ, so β/σ² there is exactly −5 dB.
    assert!((10.0 * (xi / 1.0).log10() + 5.0).abs() < 1e-12);
}
