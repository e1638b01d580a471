//! Primal-dual interior-point method for small dense SDPs with complex
//! Hermitian blocks.
//!
//! Problem form:
//!
//! ```text
//! minimize    Σ_b tr(C_b X_b)
//! subject to  Σ_b tr(A_mb X_b) ≥ r_m,   X_b ⪰ 0
//! ```
//!
//! The inequalities are turned into equalities with slacks `s_m ≥ 0`, and an
//! artificial `τ_m ≥ 0` with cost `M` is added to every row so that `X = ξI`
//! is a strictly feasible start. When some `C_b` is not positive definite a
//! trace bound `Σ tr X_b ≤ U` is added as well so that a strictly feasible
//! dual start exists. Iterates therefore stay primal and dual feasible and
//! weak duality holds at every step. If an artificial stays positive at the
//! optimum `M` is raised; past a cap the problem is declared infeasible.
//!
//! Directions are HKM with a Mehrotra predictor-corrector. Blocks are solved
//! natively in complex arithmetic rather than through a real embedding.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::linalg::{hermitian_eigen, is_hermitian, HermitianFactor};
use super::report::{elapsed_ms, SolverReport, SolverStatus};
use super::{CMat, CVec, C64};
use crate::error::{Error, Result};

/// Coefficient of one constraint on one block.
#[derive(Debug, Clone)]
pub enum BlockCoef {
    Dense(CMat),
    /// `Σ c_j v_j v_jᴴ`.
    LowRank(Vec<(f64, CVec)>),
}

impl BlockCoef {
    fn to_dense(&self, d: usize) -> CMat {
        match self {
            BlockCoef::Dense(a) => a.clone(),
            BlockCoef::LowRank(terms) => {
                let mut a = CMat::zeros(d, d);
                for (c, v) in terms {
                    a.gerc(C64::new(*c, 0.0), v, v, C64::new(1.0, 0.0));
                }
                a
            }
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            BlockCoef::Dense(a) => BlockCoef::Dense(a * C64::new(s, 0.0)),
            BlockCoef::LowRank(t) => {
                BlockCoef::LowRank(t.iter().map(|(c, v)| (c * s, v.clone())).collect())
            }
        }
    }

    /// `Re tr(A V)`.
    fn inner(&self, v: &CMat) -> f64 {
        match self {
            BlockCoef::Dense(a) => {
                let mut s = 0.0;
                for j in 0..a.ncols() {
                    for i in 0..a.nrows() {
                        s += (a[(i, j)] * v[(j, i)]).re;
                    }
                }
                s
            }
            BlockCoef::LowRank(t) => t
                .iter()
                .map(|(c, u)| c * (u.adjoint() * v * u)[(0, 0)].re)
                .sum(),
        }
    }

    /// `Z⁻¹ A X`.
    fn sandwich(&self, zinv: &CMat, x: &CMat) -> CMat {
        match self {
            BlockCoef::Dense(a) => zinv * a * x,
            BlockCoef::LowRank(t) => {
                let d = x.nrows();
                let mut out = CMat::zeros(d, d);
                for (c, u) in t {
                    let zu = zinv * u;
                    let xu = x * u;
                    out.gerc(C64::new(*c, 0.0), &zu, &xu, C64::new(1.0, 0.0));
                }
                out
            }
        }
    }

    fn add_to(&self, target: &mut CMat, w: f64) {
        match self {
            BlockCoef::Dense(a) => *target += a * C64::new(w, 0.0),
            BlockCoef::LowRank(t) => {
                for (c, u) in t {
                    target.gerc(C64::new(w * c, 0.0), u, u, C64::new(1.0, 0.0));
                }
            }
        }
    }

    fn norm(&self, d: usize) -> f64 {
        self.to_dense(d).norm()
    }
}

/// `Σ_b tr(A_b X_b) ≥ rhs`, listing only the blocks with nonzero
/// coefficients.
#[derive(Debug, Clone)]
pub struct SdpConstraint {
    pub terms: Vec<(usize, BlockCoef)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<CMat>,
    pub constraints: Vec<SdpConstraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the dual objective (a certified lower bound on the
    /// optimum) exceeds this value.
    pub dual_stop: Option<f64>,
    pub big_m: f64,
    pub max_big_m: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 150,
            dual_stop: None,
            big_m: 1e4,
            max_big_m: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<CMat>,
    /// Dual multipliers of the inequality rows (nonnegative).
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Set when the run stopped early because the dual objective passed
    /// [`SdpOptions::dual_stop`]; the value is the certified lower bound.
    pub bound_exceeded: Option<f64>,
    pub report: SolverReport,
}

impl SdpProblem {
    fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::InvalidProblem("SDP needs at least one nonempty block".into()));
        }
        if self.objective.len() != self.block_sizes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} objective blocks for {} block sizes",
                self.objective.len(),
                self.block_sizes.len()
            )));
        }
        for (b, c) in self.objective.iter().enumerate() {
            let d = self.block_sizes[b];
            if c.nrows() != d || c.ncols() != d {
                return Err(Error::DimensionMismatch(format!("objective block {b}")));
            }
            if !is_hermitian(c, 1e-10) {
                return Err(Error::InvalidProblem(format!("objective block {b} is not Hermitian")));
            }
        }
        for (m, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(Error::InvalidProblem(format!("row {m} has non-finite rhs")));
            }
            for (b, coef) in &con.terms {
                let d = *self.block_sizes.get(*b).ok_or_else(|| {
                    Error::DimensionMismatch(format!("row {m} references block {b}"))
                })?;
                match coef {
                    BlockCoef::Dense(a) => {
                        if a.nrows() != d || a.ncols() != d {
                            return Err(Error::DimensionMismatch(format!("row {m}, block {b}")));
                        }
                        if !is_hermitian(a, 1e-10) {
                            return Err(Error::InvalidProblem(format!(
                                "row {m}, block {b} is not Hermitian"
                            )));
                        }
                    }
                    BlockCoef::LowRank(t) => {
                        if t.iter().any(|(_, v)| v.len() != d) {
                            return Err(Error::DimensionMismatch(format!("row {m}, block {b}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solve `p`. The returned `y` is the dual vector of the original rows.
pub fn solve_sdp(p: &SdpProblem, opts: SdpOptions) -> Result<SdpSolution> {
    let start = Instant::now();
    p.validate()?;
    let mut big_m = opts.big_m;
    let mut bound_u = None;
    let mut report_iters = 0;
    loop {
        let mut emb = Embedded::new(p, big_m, bound_u)?;
        let out = emb.run(opts)?;
        report_iters += out.report.iterations;
        if out.bound_exceeded.is_some() {
            return Ok(finish(emb.extract(out), report_iters, start));
        }
        if out.report.status != SolverStatus::Optimal {
            let mut rep = out.report;
            rep.iterations = report_iters;
            rep.wall_ms = elapsed_ms(start);
            return Err(Error::IterLimit(Box::new(rep)));
        }
        let artificial = emb.artificial_active();
        let trace_active = emb.trace_active();
        if !artificial && !trace_active {
            return Ok(finish(emb.extract(out), report_iters, start));
        }
        if artificial {
            if big_m >= opts.max_big_m {
                let mut rep = out.report;
                rep.status = SolverStatus::Infeasible;
                rep.iterations = report_iters;
                rep.wall_ms = elapsed_ms(start);
                return Err(Error::Infeasible(Box::new(rep)));
            }
            big_m *= 100.0;
        }
        if trace_active {
            let u = emb.trace_bound.expect("trace row present");
            if u >= 1e12 {
                return Err(Error::NumericalFailure("SDP appears unbounded below".into()));
            }
            bound_u = Some(u * 100.0);
        }
    }
}

fn finish(mut sol: SdpSolution, iters: usize, start: Instant) -> SdpSolution {
    sol.report.iterations = iters;
    sol.report.wall_ms = elapsed_ms(start);
    sol
}

/// Feasible-start embedding in standard equality form, with rows and
/// objective normalized.
struct Embedded {
    sizes: Vec<usize>,
    /// Scaled objective blocks.
    c: Vec<CMat>,
    c_scale: f64,
    /// Per row: terms on PSD blocks (scaled).
    rows: Vec<Vec<(usize, BlockCoef)>>,
    row_scale: Vec<f64>,
    b: DVector<f64>,
    /// Linear variables: s (m), τ (m), then optionally u. Coefficients per
    /// row are dense `rows × nlp`.
    a_lp: DMatrix<f64>,
    c_lp: DVector<f64>,
    m_orig: usize,
    trace_bound: Option<f64>,
    // Iterate.
    x: Vec<CMat>,
    xl: DVector<f64>,
    y: DVector<f64>,
    z: Vec<CMat>,
    zl: DVector<f64>,
}

struct RunOutput {
    report: SolverReport,
    bound_exceeded: Option<f64>,
}

impl Embedded {
    fn new(p: &SdpProblem, big_m: f64, bound_u: Option<f64>) -> Result<Self> {
        let sizes = p.block_sizes.clone();
        let m = p.constraints.len();
        let c_scale = p
            .objective
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        let c: Vec<CMat> = p.objective.iter().map(|c| c / C64::new(c_scale, 0.0)).collect();
        let mut rows = Vec::with_capacity(m + 1);
        let mut row_scale = Vec::with_capacity(m + 1);
        let mut rhs = Vec::with_capacity(m + 1);
        for con in &p.constraints {
            let nrm = con
                .terms
                .iter()
                .map(|(b, a)| a.norm(sizes[*b]).powi(2))
                .sum::<f64>()
                .sqrt()
                .max(1e-300);
            rows.push(con.terms.iter().map(|(b, a)| (*b, a.scaled(1.0 / nrm))).collect());
            row_scale.push(nrm);
            rhs.push(con.rhs / nrm);
        }

        // Primal start scale: large enough that the trace term is of the
        // order of the normalized right-hand sides.
        let xi = rhs.iter().fold(1.0f64, |a, r| a.max(r.abs()));
        let x: Vec<CMat> = sizes.iter().map(|&d| CMat::identity(d, d) * C64::new(xi, 0.0)).collect();

        // Dual start: half the largest y0 ≤ 1 (by halving) keeping Z positive
        // definite; fall back to a trace bound if none exists.
        let mut y0 = 1.0;
        let mut z_ok = None;
        for _ in 0..40 {
            let z = dual_slack_blocks(&sizes, &c, &rows, &vec![y0; m], 0.0);
            if z.iter().all(|zb| HermitianFactor::new(zb).is_ok()) {
                z_ok = Some(z);
                break;
            }
            y0 *= 0.5;
        }
        // One more halving keeps Z ⪰ C/2, away from the boundary.
        if z_ok.is_some() {
            y0 *= 0.5;
        }
        let needs_trace = z_ok.is_none() || bound_u.is_some();
        let (trace_bound, y_u) = if needs_trace {
            let y0s = vec![y0; m];
            let z = dual_slack_blocks(&sizes, &c, &rows, &y0s, 0.0);
            let lmin = z
                .iter()
                .map(|zb| hermitian_eigen(zb).0.iter().copied().fold(f64::INFINITY, f64::min))
                .fold(f64::INFINITY, f64::min);
            let total_dim: usize = sizes.iter().sum();
            let u = bound_u.unwrap_or(1e4 * xi * total_dim as f64);
            (Some(u), lmin.min(0.0) - 1.0)
        } else {
            (None, 0.0)
        };
        let n_rows = m + usize::from(needs_trace);
        if needs_trace {
            rows.push(
                sizes
                    .iter()
                    .enumerate()
                    .map(|(b, &d)| (b, BlockCoef::Dense(CMat::identity(d, d))))
                    .collect(),
            );
            row_scale.push(1.0);
            rhs.push(trace_bound.unwrap());
        }
        let nlp = 2 * m + usize::from(needs_trace);
        let mut a_lp = DMatrix::zeros(n_rows, nlp);
        let mut c_lp = DVector::zeros(nlp);
        for k in 0..m {
            a_lp[(k, k)] = -1.0;
            a_lp[(k, m + k)] = 1.0;
            c_lp[m + k] = big_m;
        }
        if needs_trace {
            a_lp[(m, 2 * m)] = 1.0;
        }
        let b = DVector::from_vec(rhs);

        let mut emb = Self {
            sizes,
            c,
            c_scale,
            rows,
            row_scale,
            b,
            a_lp,
            c_lp,
            m_orig: m,
            trace_bound,
            x,
            xl: DVector::zeros(nlp),
            y: DVector::zeros(n_rows),
            z: Vec::new(),
            zl: DVector::zeros(nlp),
        };

        // Linear primal variables.
        let ax = emb.apply_a(&emb.x);
        for k in 0..m {
            let v = emb.b[k] - ax[k];
            let s_k = if v < 0.0 { -v + 1.0 } else { 1.0 };
            emb.xl[k] = s_k;
            emb.xl[m + k] = v + s_k;
        }
        if needs_trace {
            let u = emb.b[m] - ax[m];
            if u <= 0.0 {
                return Err(Error::NumericalFailure("trace bound below start trace".into()));
            }
            emb.xl[2 * m] = u;
        }

        // Dual variables.
        for k in 0..m {
            emb.y[k] = y0;
        }
        if needs_trace {
            emb.y[m] = y_u;
        }
        let ylist: Vec<f64> = emb.y.iter().copied().collect();
        emb.z = dual_slack_blocks(&emb.sizes, &emb.c, &emb.rows, &ylist, 0.0);
        emb.zl = &emb.c_lp - emb.a_lp.transpose() * &emb.y;
        if emb.zl.iter().any(|&v| v <= 0.0) {
            return Err(Error::NumericalFailure("big-M too small for dual start".into()));
        }
        Ok(emb)
    }

    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `𝒜(V)` over the PSD blocks only.
    fn apply_a(&self, v: &[CMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.n_rows(),
            self.rows
                .iter()
                .map(|terms| terms.iter().map(|(b, a)| a.inner(&v[*b])).sum::<f64>()),
        )
    }

    fn apply_a_adj(&self, y: &DVector<f64>) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.sizes.iter().map(|&d| CMat::zeros(d, d)).collect();
        for (k, terms) in self.rows.iter().enumerate() {
            for (b, a) in terms {
                a.add_to(&mut out[*b], y[k]);
            }
        }
        out
    }

    fn primal_objective(&self) -> f64 {
        let mut f: f64 = self
            .c
            .iter()
            .zip(&self.x)
            .map(|(c, x)| c.dotc(x).re)
            .sum();
        f += self.c_lp.dot(&self.xl);
        f
    }

    fn dual_objective(&self) -> f64 {
        self.b.dot(&self.y)
    }

    fn total_dim(&self) -> usize {
        self.sizes.iter().sum::<usize>() + self.xl.len()
    }

    fn mu(&self) -> f64 {
        let mut s: f64 = self.x.iter().zip(&self.z).map(|(x, z)| x.dotc(z).re).sum();
        s += self.xl.dot(&self.zl);
        s / self.total_dim() as f64
    }

    fn artificial_active(&self) -> bool {
        let m = self.m_orig;
        (0..m).any(|k| self.xl[m + k] > 1e-6 * (1.0 + self.b[k].abs()))
    }

    fn trace_active(&self) -> bool {
        match self.trace_bound {
            Some(u) => self.xl[2 * self.m_orig] < 1e-3 * u,
            None => false,
        }
    }

    fn run(&mut self, opts: SdpOptions) -> Result<RunOutput> {
        let mut report = SolverReport::new(SolverStatus::IterLimit);
        let nb = self.sizes.len();
        let nr = self.n_rows();
        let b_norm = 1.0 + self.b.norm();
        let c_norm = 1.0 + self.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt() + self.c_lp.norm();
        for it in 0..opts.max_iter {
            let pobj = self.primal_objective();
            let dobj = self.dual_objective();
            report.trajectory.push(pobj * self.c_scale);
            report.dual_trajectory.push(dobj * self.c_scale);

            let rp = &self.b - self.apply_a(&self.x) - &self.a_lp * &self.xl;
            let aty = self.apply_a_adj(&self.y);
            let rd: Vec<CMat> = (0..nb).map(|b| &self.c[b] - &self.z[b] - &aty[b]).collect();
            let rd_lp = &self.c_lp - &self.zl - self.a_lp.transpose() * &self.y;
            let pinf = rp.norm() / b_norm;
            let dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt() / c_norm;
            let gap = (pobj - dobj) / (1.0 + pobj.abs() + dobj.abs());
            report.iterations = it;
            report.gap = gap.abs();
            report.residual = pinf.max(dinf);
            if gap.abs() <= opts.tol && pinf <= opts.tol && dinf <= opts.tol {
                report.status = SolverStatus::Optimal;
                break;
            }
            if let Some(cap) = opts.dual_stop {
                if self.trace_bound.is_none() && dinf <= 1e-8 && dobj * self.c_scale > cap {
                    report.status = SolverStatus::IterLimit;
                    report.objective = pobj * self.c_scale;
                    return Ok(RunOutput {
                        report,
                        bound_exceeded: Some(dobj * self.c_scale),
                    });
                }
            }

            let mu = self.mu();
            let xf: Vec<HermitianFactor> = self
                .x
                .iter()
                .map(HermitianFactor::new)
                .collect::<Result<_>>()
                .map_err(|_| Error::NumericalFailure("primal iterate lost definiteness".into()))?;
            let zf: Vec<HermitianFactor> = self
                .z
                .iter()
                .map(HermitianFactor::new)
                .collect::<Result<_>>()
                .map_err(|_| Error::NumericalFailure("dual iterate lost definiteness".into()))?;
            let zinv: Vec<CMat> = zf.iter().map(|f| f.inverse()).collect();

            // Schur complement.
            let mut sandwiches: Vec<Vec<(usize, CMat)>> = Vec::with_capacity(nr);
            for terms in &self.rows {
                sandwiches.push(
                    terms
                        .iter()
                        .map(|(b, a)| (*b, a.sandwich(&zinv[*b], &self.x[*b])))
                        .collect(),
                );
            }
            let mut schur = DMatrix::zeros(nr, nr);
            for l in 0..nr {
                for k in 0..=l {
                    let mut v = 0.0;
                    for (b, t) in &sandwiches[l] {
                        for (bk, a) in &self.rows[k] {
                            if bk == b {
                                v += a.inner(t);
                            }
                        }
                    }
                    schur[(k, l)] = v;
                    schur[(l, k)] = v;
                }
            }
            let ratio = self.xl.component_div(&self.zl);
            for k in 0..nr {
                for l in 0..nr {
                    let mut v = 0.0;
                    for j in 0..self.xl.len() {
                        v += self.a_lp[(k, j)] * self.a_lp[(l, j)] * ratio[j];
                    }
                    schur[(k, l)] += v;
                }
            }
            let chol = factor_schur(schur)?;

            // Predictor.
            let kzero: Vec<CMat> = self.sizes.iter().map(|&d| CMat::zeros(d, d)).collect();
            let klp0 = DVector::zeros(self.xl.len());
            let (dx_a, dxl_a, _dy_a, dz_a, dzl_a) =
                self.direction(&chol, &zinv, &rp, &rd, &rd_lp, &kzero, &klp0);
            let ap = self.step_primal(&xf, &dx_a, &dxl_a);
            let ad = self.step_dual(&zf, &dz_a, &dzl_a);
            let mut mu_aff = 0.0;
            for b in 0..nb {
                let xa = &self.x[b] + &dx_a[b] * C64::new(ap, 0.0);
                let za = &self.z[b] + &dz_a[b] * C64::new(ad, 0.0);
                mu_aff += xa.dotc(&za).re;
            }
            mu_aff += (&self.xl + &dxl_a * ap).dot(&(&self.zl + &dzl_a * ad));
            mu_aff /= self.total_dim() as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let kc: Vec<CMat> = (0..nb)
                .map(|b| {
                    let d = self.sizes[b];
                    CMat::identity(d, d) * C64::new(sigma * mu, 0.0) - &dx_a[b] * &dz_a[b]
                })
                .collect();
            let kclp = DVector::from_fn(self.xl.len(), |j, _| sigma * mu - dxl_a[j] * dzl_a[j]);
            let (dx, dxl, dy, dz, dzl) = self.direction(&chol, &zinv, &rp, &rd, &rd_lp, &kc, &kclp);
            let ap = (0.95 * self.step_primal(&xf, &dx, &dxl)).min(1.0);
            let ad = (0.95 * self.step_dual(&zf, &dz, &dzl)).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                return Err(Error::NumericalFailure("SDP step length collapsed".into()));
            }
            for b in 0..nb {
                self.x[b] += &dx[b] * C64::new(ap, 0.0);
                self.z[b] += &dz[b] * C64::new(ad, 0.0);
            }
            self.xl += &dxl * ap;
            self.y += &dy * ad;
            self.zl += &dzl * ad;
            report.iterations = it + 1;
        }
        report.objective = self.primal_objective() * self.c_scale;
        Ok(RunOutput {
            report,
            bound_exceeded: None,
        })
    }

    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    fn direction(
        &self,
        chol: &Cholesky<f64, nalgebra::Dyn>,
        zinv: &[CMat],
        rp: &DVector<f64>,
        rd: &[CMat],
        rd_lp: &DVector<f64>,
        k: &[CMat],
        k_lp: &DVector<f64>,
    ) -> (Vec<CMat>, DVector<f64>, DVector<f64>, Vec<CMat>, DVector<f64>) {
        let nb = self.sizes.len();
        // ΔX = K Z⁻¹ − X − X (Rd − 𝒜*Δy) Z⁻¹, split into the Δy-free part.
        let base: Vec<CMat> = (0..nb)
            .map(|b| &k[b] * &zinv[b] - &self.x[b] - &self.x[b] * &rd[b] * &zinv[b])
            .collect();
        let base_lp = DVector::from_fn(self.xl.len(), |j, _| {
            k_lp[j] / self.zl[j] - self.xl[j] - self.xl[j] * rd_lp[j] / self.zl[j]
        });
        let rhs = rp - self.apply_a(&base) - &self.a_lp * &base_lp;
        let dy = chol.solve(&rhs);
        let aty = self.apply_a_adj(&dy);
        let dz: Vec<CMat> = (0..nb).map(|b| &rd[b] - &aty[b]).collect();
        let dzl = rd_lp - self.a_lp.transpose() * &dy;
        let dx: Vec<CMat> = (0..nb)
            .map(|b| {
                let raw = &k[b] * &zinv[b] - &self.x[b] - &self.x[b] * &dz[b] * &zinv[b];
                (&raw + raw.adjoint()) * C64::new(0.5, 0.0)
            })
            .collect();
        let dxl = DVector::from_fn(self.xl.len(), |j, _| {
            (k_lp[j] - self.xl[j] * self.zl[j] - self.xl[j] * dzl[j]) / self.zl[j]
        });
        (dx, dxl, dy, dz, dzl)
    }

    fn step_primal(&self, xf: &[HermitianFactor], dx: &[CMat], dxl: &DVector<f64>) -> f64 {
        let mut a = f64::INFINITY;
        for (f, d) in xf.iter().zip(dx) {
            a = a.min(max_psd_step(f, d));
        }
        for j in 0..dxl.len() {
            if dxl[j] < 0.0 {
                a = a.min(-self.xl[j] / dxl[j]);
            }
        }
        a.min(1.0 / 0.95)
    }

    fn step_dual(&self, zf: &[HermitianFactor], dz: &[CMat], dzl: &DVector<f64>) -> f64 {
        let mut a = f64::INFINITY;
        for (f, d) in zf.iter().zip(dz) {
            a = a.min(max_psd_step(f, d));
        }
        for j in 0..dzl.len() {
            if dzl[j] < 0.0 {
                a = a.min(-self.zl[j] / dzl[j]);
            }
        }
        a.min(1.0 / 0.95)
    }

    fn extract(&self, out: RunOutput) -> SdpSolution {
        let m = self.m_orig;
        let y: Vec<f64> = (0..m)
            .map(|k| self.y[k] * self.c_scale / self.row_scale[k])
            .collect();
        let primal: f64 = self
            .c
            .iter()
            .zip(&self.x)
            .map(|(c, x)| c.dotc(x).re)
            .sum::<f64>()
            * self.c_scale;
        let dual = self.dual_objective() * self.c_scale;
        let mut report = out.report;
        report.objective = primal;
        SdpSolution {
            x: self.x.clone(),
            y,
            primal_objective: primal,
            dual_objective: dual,
            bound_exceeded: out.bound_exceeded,
            report,
        }
    }
}

fn dual_slack_blocks(
    sizes: &[usize],
    c: &[CMat],
    rows: &[Vec<(usize, BlockCoef)>],
    y: &[f64],
    y_trace: f64,
) -> Vec<CMat> {
    let mut z: Vec<CMat> = c.to_vec();
    for (k, terms) in rows.iter().enumerate().take(y.len()) {
        for (b, a) in terms {
            a.add_to(&mut z[*b], -y[k]);
        }
    }
    for (b, &d) in sizes.iter().enumerate() {
        z[b] -= CMat::identity(d, d) * C64::new(y_trace, 0.0);
    }
    z
}

fn factor_schur(mut m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let scale = m.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(c) = Cholesky::new(m.clone()) {
            return Ok(c);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..n {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
    Err(Error::NumericalFailure("Schur complement is singular".into()))
}

/// Largest `α` with `X + αΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_psd_step(f: &HermitianFactor, d: &CMat) -> f64 {
    let w = f.solve_lower(d);
    let w = f.solve_lower(&w.adjoint());
    let (vals, _) = hermitian_eigen(&w);
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}
