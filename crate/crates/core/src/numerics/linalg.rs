//! Dense complex Hermitian kernels.
//!
//! The Cholesky factorization is written out by hand because the generic
//! complex path in nalgebra takes square roots of negative pivots without
//! complaint, and positive-definiteness is exactly what callers need checked.

use nalgebra::{DVector, SymmetricEigen};

use super::{CMat, CVec, C64};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `A = L Lᴴ` of a Hermitian positive
/// definite matrix.
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    l: CMat,
}

impl HermitianFactor {
    /// Factor `a`, reading only its lower triangle.
    pub fn new(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = C64::new(ljj, 0.0);
            let inv = 1.0 / ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s * inv;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &CMat {
        &self.l
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: &CMat) -> CMat {
        let n = self.dim();
        let mut x = b.clone();
        for c in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)].re;
            }
        }
        x
    }

    /// `L⁻ᴴ B`.
    pub fn solve_upper(&self, b: &CMat) -> CMat {
        let n = self.dim();
        let mut x = b.clone();
        for c in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.l[(k, i)].conj() * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)].re;
            }
        }
        x
    }

    /// `A⁻¹ B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let m = CMat::from_column_slice(b.len(), 1, b.as_slice());
        let x = self.solve(&m);
        CVec::from_column_slice(x.as_slice())
    }

    /// `A⁻¹` as a dense matrix. Only used for small blocks inside the SDP
    /// solver, where the inverse itself enters the Newton system.
    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.dim(), self.dim()))
    }
}

/// Solve `A X = B` for Hermitian positive definite `A`.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(HermitianFactor::new(a)?.solve(b))
}

/// Orthonormal basis of the column space of `h`.
///
/// The numerical rank counts singular values above `tol · σ_max`.
pub fn orthonormal_range(h: &CMat, tol: f64) -> Result<(CMat, usize)> {
    if h.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::ZeroMatrix);
    }
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| svd.singular_values[k] > tol * smax)
        .collect();
    let r = keep.len();
    let mut basis = CMat::zeros(h.nrows(), r);
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(k));
    }
    Ok((basis, r))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order.
pub fn hermitian_eigen(a: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = CMat::zeros(a.nrows(), n);
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// `max|A − Aᴴ| ≤ rel · max|A|`.
pub fn is_hermitian(a: &CMat, rel: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dev = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    dev <= rel * scale
}

/// `I + H diag(d) Hᴴ` with `d ≥ 0`, applied through the Woodbury identity when
/// the number of columns of `H` is smaller than its row count.
///
/// With `S = diag(√d)` and `M = I + S HᴴH S`, the inverse is
/// `I − H S M⁻¹ S Hᴴ`, so solves cost `O(N m)` per right-hand side after an
/// `O(N m²)` setup.
#[derive(Debug, Clone)]
pub struct IdentityPlusLowRank {
    h: CMat,
    sqrt_d: DVector<f64>,
    gram: CMat,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Woodbury(HermitianFactor),
    Dense(HermitianFactor),
}

impl IdentityPlusLowRank {
    pub fn new(h: CMat, d: &[f64]) -> Result<Self> {
        if d.len() != h.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} columns",
                d.len(),
                h.ncols()
            )));
        }
        if let Some(bad) = d.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "low-rank weights must be finite and nonnegative, got {bad}"
            )));
        }
        let sqrt_d = DVector::from_iterator(d.len(), d.iter().map(|x| x.sqrt()));
        let gram = h.adjoint() * &h;
        let m = h.ncols();
        let n = h.nrows();
        let kind = if m < n {
            let mut core = CMat::identity(m, m);
            for a in 0..m {
                for b in 0..m {
                    core[(a, b)] += gram[(a, b)] * (sqrt_d[a] * sqrt_d[b]);
                }
            }
            Kind::Woodbury(HermitianFactor::new(&core)?)
        } else {
            Kind::Dense(HermitianFactor::new(&dense(&h, &sqrt_d))?)
        };
        Ok(Self {
            h,
            sqrt_d,
            gram,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn to_dense(&self) -> CMat {
        dense(&self.h, &self.sqrt_d)
    }

    /// `R⁻¹ B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        match &self.kind {
            Kind::Dense(f) => f.solve(b),
            Kind::Woodbury(f) => {
                let mut t = self.h.adjoint() * b;
                scale_rows(&mut t, &self.sqrt_d);
                let mut t = f.solve(&t);
                scale_rows(&mut t, &self.sqrt_d);
                b - &self.h * t
            }
        }
    }

    /// `Hᴴ R⁻¹ H` without touching `N`-dimensional data beyond the Gram
    /// matrix.
    pub fn inner_inverse(&self) -> CMat {
        match &self.kind {
            Kind::Dense(f) => self.h.adjoint() * f.solve(&self.h),
            Kind::Woodbury(f) => {
                let mut t = self.gram.clone();
                scale_rows(&mut t, &self.sqrt_d);
                let mut t = f.solve(&t);
                scale_rows(&mut t, &self.sqrt_d);
                &self.gram - &self.gram * t
            }
        }
    }
}

fn dense(h: &CMat, sqrt_d: &DVector<f64>) -> CMat {
    let mut hs = h.clone();
    for (c, s) in sqrt_d.iter().enumerate() {
        hs.column_mut(c).scale_mut(*s);
    }
    CMat::identity(h.nrows(), h.nrows()) + &hs * hs.adjoint()
}

fn scale_rows(m: &mut CMat, s: &DVector<f64>) {
    for (r, v) in s.iter().enumerate() {
        m.row_mut(r).scale_mut(*v);
    }
}

/// Column-stack a list of equally tall matrices.
pub fn hstack(parts: &[&CMat]) -> CMat {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for m in parts {
        out.view_mut((0, c), (rows, m.ncols())).copy_from(*m);
        c += m.ncols();
    }
    out
}
