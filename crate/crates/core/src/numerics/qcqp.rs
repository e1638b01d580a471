//! Log-barrier interior-point method for small dense convex QCQPs.
//!
//! Problem form (real variables, `n` even because every instance is a lifted
//! complex problem):
//!
//! ```text
//! minimize    xᵀQ₀x + 2q₀ᵀx + c₀
//! subject to  xᵀQ_m x + 2q_mᵀx + c_m ≤ 0,   m = 1..M
//! ```
//!
//! Each centering step runs damped Newton on `t·f₀ − Σ log(−f_m)`; `t` grows by
//! `mu` until the duality measure `M/t` drops below `tol·(1 + |f₀|)`. Without a
//! strictly feasible start a phase-I problem `min s s.t. f_m(x) ≤ s, s ≥ −1`
//! is solved first.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::report::{elapsed_ms, SolverReport, SolverStatus};
use crate::error::{Error, Result};

/// Quadratic part of a function, stored either densely or as a real factor
/// `F` with `Q = F Fᵀ` (cheaper when the rank is small).
#[derive(Debug, Clone)]
pub enum Quadratic {
    Zero,
    Dense(DMatrix<f64>),
    Factored(DMatrix<f64>),
}

impl Quadratic {
    fn dim_ok(&self, n: usize) -> bool {
        match self {
            Quadratic::Zero => true,
            Quadratic::Dense(q) => q.nrows() == n && q.ncols() == n,
            Quadratic::Factored(f) => f.nrows() == n,
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Quadratic::Zero => DVector::zeros(x.len()),
            Quadratic::Dense(q) => q * x,
            Quadratic::Factored(f) => f * (f.transpose() * x),
        }
    }

    /// `h += w · Q` on the leading block of `h`.
    fn add_to(&self, h: &mut DMatrix<f64>, w: f64) {
        match self {
            Quadratic::Zero => {}
            Quadratic::Dense(q) => {
                let n = q.nrows();
                let mut view = h.view_mut((0, 0), (n, n));
                view += q * w;
            }
            Quadratic::Factored(f) => {
                let n = f.nrows();
                let mut view = h.view_mut((0, 0), (n, n));
                view.gemm(w, f, &f.transpose(), 1.0);
            }
        }
    }

    fn frobenius(&self) -> f64 {
        match self {
            Quadratic::Zero => 0.0,
            Quadratic::Dense(q) => q.norm(),
            Quadratic::Factored(f) => (f.transpose() * f).norm(),
        }
    }

    fn is_psd(&self) -> bool {
        match self {
            Quadratic::Zero | Quadratic::Factored(_) => true,
            Quadratic::Dense(q) => {
                let scale = q.norm().max(1e-300);
                let sym = (q + q.transpose()) * 0.5;
                if (q - &sym).norm() > 1e-10 * scale {
                    return false;
                }
                let shifted = sym + DMatrix::identity(q.nrows(), q.nrows()) * (1e-10 * scale);
                Cholesky::new(shifted).is_some()
            }
        }
    }
}

/// `xᵀQx + 2qᵀx + c`.
#[derive(Debug, Clone)]
pub struct QuadConstraint {
    pub quad: Quadratic,
    pub lin: DVector<f64>,
    pub c: f64,
}

impl QuadConstraint {
    pub fn new(quad: Quadratic, lin: DVector<f64>, c: f64) -> Self {
        Self { quad, lin, c }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let qx = self.quad.apply(x);
        x.dot(&qx) + 2.0 * self.lin.dot(x) + self.c
    }

    fn scale(&self) -> f64 {
        self.quad
            .frobenius()
            .max(self.lin.norm())
            .max(self.c.abs())
            .max(1e-300)
    }
}

#[derive(Debug, Clone)]
pub struct ConvexQcqp {
    pub n: usize,
    pub objective: QuadConstraint,
    pub constraints: Vec<QuadConstraint>,
}

impl ConvexQcqp {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidProblem(format!(
                "lifted dimension must be positive and even, got {}",
                self.n
            )));
        }
        for (k, f) in std::iter::once(&self.objective).chain(&self.constraints).enumerate() {
            if !f.quad.dim_ok(self.n) || f.lin.len() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "function {k} does not match dimension {}",
                    self.n
                )));
            }
            if !f.quad.is_psd() {
                return Err(Error::InvalidProblem(format!(
                    "quadratic term of function {k} is not positive semidefinite"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QcqpOptions {
    pub tol: f64,
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for QcqpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu: 10.0,
            max_outer: 60,
            max_newton: 100,
        }
    }
}

/// Solve `p` starting from `x0` when it is strictly feasible, otherwise after
/// a phase-I search.
///
/// Returns `Err(Infeasible)` when the phase-I optimum is positive,
/// `Err(IterLimit)` / `Err(NumericalFailure)` when Newton stalls.
pub fn solve_convex_qcqp(
    p: &ConvexQcqp,
    x0: Option<&DVector<f64>>,
    opts: QcqpOptions,
) -> Result<(DVector<f64>, SolverReport)> {
    let start = Instant::now();
    p.validate()?;
    if let Some(x) = x0 {
        if x.len() != p.n {
            return Err(Error::DimensionMismatch(format!(
                "start has length {}, problem dimension {}",
                x.len(),
                p.n
            )));
        }
    }

    let cons: Vec<Scaled> = p.constraints.iter().map(Scaled::new).collect();
    let obj_scale = p.objective.scale();
    let obj = Scaled {
        f: &p.objective,
        inv: 1.0 / obj_scale,
        slack: 0.0,
    };

    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(p.n));
    let strictly_feasible = |x: &DVector<f64>| cons.iter().all(|c| c.value(x) < 0.0);

    if !strictly_feasible(&x) {
        x = phase_one(p.n, &cons, &x, opts)?.0;
    }

    let m = cons.len() as f64;
    let mut report = SolverReport::new(SolverStatus::IterLimit);
    if cons.is_empty() {
        // Unconstrained convex quadratic: a single Newton step.
        let mut h = DMatrix::zeros(p.n, p.n);
        obj.add_hessian(&mut h, 1.0);
        let g = obj.grad(&x);
        let dx = newton_solve(&h, &g).ok_or_else(|| {
            Error::NumericalFailure("singular Hessian in unconstrained QCQP".into())
        })?;
        x -= dx;
        report.status = SolverStatus::Optimal;
        report.objective = p.objective.eval(&x);
        report.trajectory.push(report.objective);
        report.iterations = 1;
        report.wall_ms = elapsed_ms(start);
        return Ok((x, report));
    }

    let f_start = obj.value(&x);
    let mut t = (m / (1.0 + f_start.abs())).max(1e-3);
    for outer in 0..opts.max_outer {
        center(&mut x, &obj, &cons, t, opts.max_newton)?;
        let f = obj.value(&x);
        report.trajectory.push(p.objective.eval(&x));
        report.iterations = outer + 1;
        report.gap = m / t;
        if m / t <= opts.tol * (1.0 + f.abs()) {
            report.status = SolverStatus::Optimal;
            break;
        }
        t *= opts.mu;
    }
    report.objective = p.objective.eval(&x);
    report.residual = p
        .constraints
        .iter()
        .map(|c| c.eval(&x).max(0.0) / c.scale())
        .fold(0.0, f64::max);
    report.wall_ms = elapsed_ms(start);
    if report.status != SolverStatus::Optimal {
        return Err(Error::IterLimit(Box::new(report)));
    }
    Ok((x, report))
}

/// A function scaled by `1/scale`, optionally with a trailing slack variable
/// entering linearly as `− slack·s` (phase I).
struct Scaled<'a> {
    f: &'a QuadConstraint,
    inv: f64,
    slack: f64,
}

impl<'a> Scaled<'a> {
    fn new(f: &'a QuadConstraint) -> Self {
        Self {
            f,
            inv: 1.0 / f.scale(),
            slack: 0.0,
        }
    }

    fn n(&self) -> usize {
        self.f.lin.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.n();
        let xs = x.rows(0, n).into_owned();
        let mut v = self.f.eval(&xs) * self.inv;
        if x.len() > n {
            v -= self.slack * x[n];
        }
        v
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let xs = x.rows(0, n).into_owned();
        let g = (self.f.quad.apply(&xs) + &self.f.lin) * (2.0 * self.inv);
        let mut out = DVector::zeros(x.len());
        out.rows_mut(0, n).copy_from(&g);
        if x.len() > n {
            out[n] = -self.slack;
        }
        out
    }

    fn add_hessian(&self, h: &mut DMatrix<f64>, w: f64) {
        self.f.quad.add_to(h, 2.0 * self.inv * w);
    }
}

/// Objective used by phase I: the slack variable itself.
struct Phase<'a> {
    cons: &'a [Scaled<'a>],
}

fn phase_one(
    n: usize,
    cons: &[Scaled],
    x0: &DVector<f64>,
    opts: QcqpOptions,
) -> Result<(DVector<f64>, usize)> {
    let with_slack: Vec<Scaled> = cons
        .iter()
        .map(|c| Scaled {
            f: c.f,
            inv: c.inv,
            slack: 1.0,
        })
        .collect();
    let phase = Phase { cons: &with_slack };
    let worst = cons.iter().map(|c| c.value(x0)).fold(f64::NEG_INFINITY, f64::max);
    let mut y = DVector::zeros(n + 1);
    y.rows_mut(0, n).copy_from(x0);
    y[n] = worst.max(-0.5) + 1.0;

    let m = with_slack.len() as f64 + 1.0;
    let mut t = 1.0;
    let mut iters = 0;
    for _ in 0..opts.max_outer {
        iters += center_phase(&mut y, &phase, t, opts.max_newton)?;
        let s = y[n];
        let worst = cons.iter().map(|c| c.value(&y.rows(0, n).into_owned())).fold(f64::NEG_INFINITY, f64::max);
        if worst <= -1e-3 {
            return Ok((y.rows(0, n).into_owned(), iters));
        }
        if m / t <= opts.tol {
            if worst < 0.0 {
                return Ok((y.rows(0, n).into_owned(), iters));
            }
            let mut report = SolverReport::new(SolverStatus::Infeasible);
            report.objective = s;
            report.gap = m / t;
            report.iterations = iters;
            if s > opts.tol {
                return Err(Error::Infeasible(Box::new(report)));
            }
            return Err(Error::NumericalFailure(format!(
                "feasible set has no interior (phase-I optimum {s:e})"
            )));
        }
        t *= opts.mu;
    }
    let mut report = SolverReport::new(SolverStatus::IterLimit);
    report.iterations = iters;
    Err(Error::IterLimit(Box::new(report)))
}

fn newton_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = h.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        if reg > 0.0 {
            for i in 0..n {
                hr[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(hr) {
            let d = ch.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

/// Damped Newton on `t·f₀ − Σ log(−f_m)`; returns the number of steps.
fn center(
    x: &mut DVector<f64>,
    obj: &Scaled,
    cons: &[Scaled],
    t: f64,
    max_newton: usize,
) -> Result<usize> {
    let barrier = |x: &DVector<f64>| -> Option<f64> {
        let mut phi = t * obj.value(x);
        for c in cons {
            let v = c.value(x);
            if !(v < 0.0) {
                return None;
            }
            phi -= (-v).ln();
        }
        Some(phi)
    };
    newton_loop(x, max_newton, barrier, |x| {
        let n = x.len();
        let mut g = obj.grad(x) * t;
        let mut h = DMatrix::zeros(n, n);
        obj.add_hessian(&mut h, t);
        for c in cons {
            let v = c.value(x);
            let gc = c.grad(x);
            g.axpy(-1.0 / v, &gc, 1.0);
            c.add_hessian(&mut h, -1.0 / v);
            h.ger(1.0 / (v * v), &gc, &gc, 1.0);
        }
        (g, h)
    })
}

fn center_phase(y: &mut DVector<f64>, phase: &Phase, t: f64, max_newton: usize) -> Result<usize> {
    let n = y.len() - 1;
    let barrier = |y: &DVector<f64>| -> Option<f64> {
        let s = y[n];
        if !(-1.0 - s < 0.0) {
            return None;
        }
        let mut phi = t * s - (1.0 + s).ln();
        for c in phase.cons {
            let v = c.value(y);
            if !(v < 0.0) {
                return None;
            }
            phi -= (-v).ln();
        }
        Some(phi)
    };
    newton_loop(y, max_newton, barrier, |y| {
        let dim = y.len();
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        g[n] = t - 1.0 / (1.0 + y[n]);
        h[(n, n)] = 1.0 / (1.0 + y[n]).powi(2);
        for c in phase.cons {
            let v = c.value(y);
            let gc = c.grad(y);
            g.axpy(-1.0 / v, &gc, 1.0);
            c.add_hessian(&mut h, -1.0 / v);
            h.ger(1.0 / (v * v), &gc, &gc, 1.0);
        }
        (g, h)
    })
}

fn newton_loop(
    x: &mut DVector<f64>,
    max_newton: usize,
    barrier: impl Fn(&DVector<f64>) -> Option<f64>,
    derivs: impl Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
) -> Result<usize> {
    let mut phi = barrier(x)
        .ok_or_else(|| Error::NumericalFailure("barrier evaluated outside its domain".into()))?;
    for it in 0..max_newton {
        let (g, h) = derivs(x);
        let dx = newton_solve(&h, &g)
            .ok_or_else(|| Error::NumericalFailure("Newton system could not be factored".into()))?;
        let dec2 = g.dot(&dx);
        if dec2 / 2.0 <= 1e-12 * (1.0 + phi.abs()) || !dec2.is_finite() {
            return Ok(it);
        }
        let mut alpha = 1.0;
        loop {
            let trial = &*x - &dx * alpha;
            if let Some(p) = barrier(&trial) {
                if p <= phi - 0.25 * alpha * dec2 {
                    *x = trial;
                    phi = p;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                // No further progress is representable; the point is as
                // centered as floating point allows.
                return Ok(it);
            }
        }
    }
    Ok(max_newton)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(center: &[f64], r2: f64) -> QuadConstraint {
        let n = center.len();
        let c = DVector::from_column_slice(center);
        QuadConstraint::new(
            Quadratic::Dense(DMatrix::identity(n, n)),
            -c.clone(),
            c.norm_squared() - r2,
        )
    }

    #[test]
    fn projection_onto_ball() {
        let p = ConvexQcqp {
            n: 2,
            objective: QuadConstraint::new(
                Quadratic::Dense(DMatrix::identity(2, 2)),
                DVector::zeros(2),
                0.0,
            ),
            constraints: vec![ball(&[1.0, 0.0], 0.25)],
        };
        let (x, rep) = solve_convex_qcqp(&p, None, QcqpOptions::default()).unwrap();
        assert!(rep.is_optimal());
        assert!((x[0] - 0.5).abs() < 1e-6 && x[1].abs() < 1e-6, "{x}");
    }

    #[test]
    fn linear_objective_on_disk() {
        let p = ConvexQcqp {
            n: 2,
            objective: QuadConstraint::new(
                Quadratic::Zero,
                DVector::from_column_slice(&[0.5, 0.0]),
                0.0,
            ),
            constraints: vec![ball(&[0.0, 0.0], 1.0)],
        };
        let (x, _) = solve_convex_qcqp(&p, None, QcqpOptions::default()).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-6 && x[1].abs() < 1e-4, "{x}");
    }

    #[test]
    fn disjoint_balls_are_infeasible() {
        let p = ConvexQcqp {
            n: 2,
            objective: QuadConstraint::new(Quadratic::Zero, DVector::zeros(2), 0.0),
            constraints: vec![ball(&[1.0, 0.0], 0.25), ball(&[-1.0, 0.0], 0.25)],
        };
        assert!(matches!(
            solve_convex_qcqp(&p, None, QcqpOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn odd_dimension_is_rejected() {
        let p = ConvexQcqp {
            n: 3,
            objective: QuadConstraint::new(Quadratic::Zero, DVector::zeros(3), 0.0),
            constraints: vec![],
        };
        assert!(matches!(
            solve_convex_qcqp(&p, None, QcqpOptions::default()),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn indefinite_constraint_is_rejected() {
        let mut q = DMatrix::identity(2, 2);
        q[(1, 1)] = -1.0;
        let p = ConvexQcqp {
            n: 2,
            objective: QuadConstraint::new(Quadratic::Zero, DVector::zeros(2), 0.0),
            constraints: vec![QuadConstraint::new(Quadratic::Dense(q), DVector::zeros(2), -1.0)],
        };
        assert!(matches!(
            solve_convex_qcqp(&p, None, QcqpOptions::default()),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn trajectory_is_nonincreasing_from_feasible_start() {
        let p = ConvexQcqp {
            n: 2,
            objective: QuadConstraint::new(
                Quadratic::Dense(DMatrix::identity(2, 2)),
                DVector::from_column_slice(&[-3.0, 1.0]),
                0.0,
            ),
            constraints: vec![ball(&[0.0, 0.0], 1.0), ball(&[0.5, 0.5], 1.0)],
        };
        let x0 = DVector::from_column_slice(&[0.2, 0.2]);
        let (_, rep) = solve_convex_qcqp(&p, Some(&x0), QcqpOptions::default()).unwrap();
        for w in rep.trajectory.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()), "{:?}", rep.trajectory);
        }
    }
}
