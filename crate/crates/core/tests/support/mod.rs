//! Brute-force oracles shared by the oracle tests and the acceptance run.

use mcbf_core::numerics::{
    solve_convex_qcqp, solve_sdp, BlockCoef, ConvexQcqp, QcqpOptions, QuadConstraint, Quadratic, SdpConstraint,
    SdpOptions, SdpProblem, C64,
};
use mcbf_core::scenario::ChannelRng;
use mcbf_core::weights::min_power_scaling;
use nalgebra::{DMatrix, DVector};

fn random_real(rng: &mut ChannelRng, r: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, k, |_, _| 2.0 * rng.uniform() - 1.0)
}

/// Hierarchical grid minimum of a QCQP inside the box `[lo, hi]`.
pub fn qcqp_grid(p: &ConvexQcqp, lo: &[f64], hi: &[f64]) -> f64 {
    let n = p.n;
    let feasible = |x: &DVector<f64>| p.constraints.iter().all(|c| c.eval(x) <= 0.0);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let pts = 24usize;
    loop {
        let steps: Vec<f64> = half.iter().map(|h| 2.0 * h / pts as f64).collect();
        let mut idx = vec![0usize; n];
        loop {
            let x = DVector::from_fn(n, |j, _| center[j] - half[j] + steps[j] * idx[j] as f64);
            if feasible(&x) {
                let f = p.objective.eval(&x);
                if best.as_ref().is_none_or(|(b, _)| f < *b) {
                    best = Some((f, x));
                }
            }
            let mut j = 0;
            while j < n {
                idx[j] += 1;
                if idx[j] <= pts {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
        let (_, x) = best.as_ref().expect("grid found no feasible point");
        if steps.iter().all(|s| *s <= 1e-3) {
            break;
        }
        center = x.iter().copied().collect();
        half = steps.iter().map(|s| 2.0 * s).collect();
    }
    best.unwrap().0
}

pub struct QcqpTrial {
    pub solver: f64,
    pub grid: f64,
    pub max_violation: f64,
}

/// Ten random 4-dimensional QCQPs: a convex quadratic objective under two
/// ellipsoids sharing a common interior point.
pub fn qcqp_trials() -> Vec<QcqpTrial> {
    let mut rng = ChannelRng::new(10);
    (0..10)
        .map(|_| {
            let n = 4;
            let m0 = random_real(&mut rng, n, n);
            let q0 = m0.transpose() * &m0 + DMatrix::identity(n, n) * 0.1;
            let q0_lin = DVector::from_fn(n, |_, _| 2.0 * rng.uniform() - 1.0);
            let xbar = DVector::from_fn(n, |_, _| rng.uniform() - 0.5);
            let mut constraints = Vec::new();
            let mut lo = vec![f64::NEG_INFINITY; n];
            let mut hi = vec![f64::INFINITY; n];
            for _ in 0..2 {
                let b = random_real(&mut rng, n, n);
                let a = b.transpose() * &b + DMatrix::identity(n, n) * 0.5;
                let center = DVector::from_fn(n, |_, _| rng.uniform() - 0.5);
                let d = &xbar - &center;
                let r2 = d.dot(&(&a * &d)) + 0.3;
                // (x − c)ᵀA(x − c) − r² = xᵀAx − 2(Ac)ᵀx + cᵀAc − r².
                let lin = -(&a * &center);
                let cst = center.dot(&(&a * &center)) - r2;
                let ainv = a.clone().try_inverse().unwrap();
                for j in 0..n {
                    let ext = (r2 * ainv[(j, j)]).sqrt();
                    lo[j] = lo[j].max(center[j] - ext);
                    hi[j] = hi[j].min(center[j] + ext);
                }
                constraints.push(QuadConstraint::new(Quadratic::Dense(a), lin, cst));
            }
            let p = ConvexQcqp {
                n,
                objective: QuadConstraint::new(Quadratic::Dense(q0), q0_lin, 0.0),
                constraints,
            };
            let (x, _) = solve_convex_qcqp(&p, None, QcqpOptions::default()).unwrap();
            QcqpTrial {
                solver: p.objective.eval(&x),
                grid: qcqp_grid(&p, &lo, &hi),
                max_violation: p.constraints.iter().map(|c| c.eval(&x)).fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub struct SdpTrial {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub grid: f64,
}

/// Two rows on one real 3×3 block. The relaxation has a rank-one optimum,
/// so the grid runs over directions `u` on the sphere, each scaled to the
/// smallest feasible length.
pub fn sdp_trials() -> Vec<SdpTrial> {
    let mut rng = ChannelRng::new(20);
    (0..10)
        .map(|_| {
            let m = random_real(&mut rng, 3, 3);
            let cm = m.transpose() * &m + DMatrix::identity(3, 3) * 0.2;
            let mut rows = Vec::new();
            let mut data = Vec::new();
            for _ in 0..2 {
                let b = random_real(&mut rng, 2, 3);
                let a = b.transpose() * &b + DMatrix::identity(3, 3) * 0.05;
                let rhs = 0.5 + rng.uniform();
                rows.push(SdpConstraint {
                    terms: vec![(0, BlockCoef::Dense(a.map(|v| C64::new(v, 0.0))))],
                    rhs,
                });
                data.push((a, rhs));
            }
            let p = SdpProblem {
                block_sizes: vec![3],
                objective: vec![cm.map(|v| C64::new(v, 0.0))],
                constraints: rows,
            };
            let sol = solve_sdp(&p, SdpOptions::default()).unwrap();

            let steps = 3000;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                let th = std::f64::consts::PI * i as f64 / steps as f64;
                for j in 0..2 * steps {
                    let ph = std::f64::consts::PI * j as f64 / steps as f64;
                    let u = DVector::from_column_slice(&[th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                    let mut s2: f64 = 0.0;
                    for (a, rhs) in &data {
                        s2 = s2.max(rhs / u.dot(&(a * &u)));
                    }
                    best = best.min(s2 * u.dot(&(&cm * &u)));
                }
            }
            SdpTrial {
                primal: sol.primal_objective,
                dual: sol.dual_objective,
                gap: sol.report.gap,
                grid: best,
            }
        })
        .collect()
}

pub struct ScalingTrial {
    pub solver: f64,
    pub grid: f64,
}

/// Minimum-power scaling for two groups of two users against a grid of
/// step 1e-3 over `[0, 3]²`, under random positive costs.
pub fn scaling_trials() -> Vec<ScalingTrial> {
    let mut rng = ChannelRng::new(30);
    (0..10)
        .map(|_| {
            // gains[i][k][j] for G = 2 groups with 2 users each.
            let gains: Vec<Vec<Vec<f64>>> = (0..2)
                .map(|i| {
                    (0..2)
                        .map(|_| (0..2).map(|j| if j == i { 1.0 + rng.uniform() } else { 0.3 * rng.uniform() }).collect())
                        .collect()
                })
                .collect();
            let gamma: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| 0.5 + rng.uniform()).collect()).collect();
            let cost = [0.5 + rng.uniform(), 0.5 + rng.uniform()];
            let p = min_power_scaling(&gains, &gamma, 1.0).expect("feasible by construction");

            let step = 1e-3;
            let n = 3000;
            let mut best = f64::INFINITY;
            for a in 0..=n {
                let p0 = a as f64 * step;
                for b in 0..=n {
                    let p1 = b as f64 * step;
                    let pp = [p0, p1];
                    let ok = (0..2).all(|i| {
                        (0..2).all(|k| {
                            let g = &gains[i][k];
                            let j = 1 - i;
                            pp[i] * g[i] >= gamma[i][k] * (pp[j] * g[j] + 1.0)
                        })
                    });
                    if ok {
                        best = best.min(cost[0] * p0 + cost[1] * p1);
                    }
                }
            }
            ScalingTrial {
                solver: cost[0] * p[0] + cost[1] * p[1],
                grid: best,
            }
        })
        .collect()
}
