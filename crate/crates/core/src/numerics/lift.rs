//! Complex-to-real lifting.
//!
//! A complex vector `w` maps to `x = [Re w; Im w]`. Under this map a
//! Hermitian form `wᴴAw` equals `xᵀ [[Re A, −Im A], [Im A, Re A]] x` and
//! `Re(bᴴw)` equals `lift(b)ᵀ x`.

use nalgebra::{DMatrix, DVector};

use super::{CMat, CVec, C64};

pub fn lift_vec(w: &CVec) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |k, _| if k < n { w[k].re } else { w[k - n].im })
}

pub fn unlift_vec(x: &DVector<f64>) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |k, _| C64::new(x[k], x[k + n]))
}

/// Real symmetric matrix of the Hermitian form `wᴴAw`.
pub fn lift_hermitian(a: &CMat) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = a[(i, j)];
            m[(i, j)] = z.re;
            m[(i + n, j + n)] = z.re;
            m[(i, j + n)] = -z.im;
            m[(i + n, j)] = z.im;
        }
    }
    m
}

/// Real factor `F` (2n × 2) with `F Fᵀ` equal to the lift of `f fᴴ`.
pub fn lift_rank_one(f: &CVec) -> DMatrix<f64> {
    let n = f.len();
    let mut m = DMatrix::zeros(2 * n, 2);
    for k in 0..n {
        m[(k, 0)] = f[k].re;
        m[(k + n, 0)] = f[k].im;
        m[(k, 1)] = -f[k].im;
        m[(k + n, 1)] = f[k].re;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn hermitian_form_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(1..6);
            let m = CMat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>(), rng.random::<f64>()));
            let a = &m + m.adjoint();
            let w = cvec(&mut rng, n);
            let complex = (w.adjoint() * &a * &w)[(0, 0)].re;
            let x = lift_vec(&w);
            let real = (x.transpose() * lift_hermitian(&a) * &x)[(0, 0)];
            assert!((complex - real).abs() <= 1e-12 * (1.0 + complex.abs()));
            let b = cvec(&mut rng, n);
            let lin = (b.adjoint() * &w)[(0, 0)].re;
            assert!((lin - lift_vec(&b).dot(&x)).abs() < 1e-12);
            let f = lift_rank_one(&b);
            let outer = &b * b.adjoint();
            assert!((&f * f.transpose() - lift_hermitian(&outer)).norm() < 1e-12);
            assert_eq!(unlift_vec(&x), w);
        }
    }
}
