//! Dense matrix kernel shared by every solver and metric.
//!
//! Matrices are `nalgebra` column-major `f64` matrices. Video data uses the
//! frames-as-columns convention: each column is one vectorized frame.
//! SVDs are computed by LAPACK's divide-and-conquer driver.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView2, ShapeBuilder};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};

/// Column-major real matrix.
pub type DenseMatrix = DMatrix<f64>;

/// Default absolute tolerance on unit-scale data.
pub const DEFAULT_TOL: f64 = 1e-10;


pub fn ensure_finite(a: &DenseMatrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Thin singular value decomposition `a = u * diag(s) * v^T`, with `s`
/// sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        truncate_rank(self, self.s.len())
    }

    /// Number of singular values above `rel_tol * s[0]`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        match self.s.iter().next() {
            None => 0,
            Some(&s0) if s0 <= 0.0 => 0,
            Some(&s0) => self.s.iter().filter(|&&x| x > rel_tol * s0).count(),
        }
    }

    /// Recombines the factors after mapping every singular value through `f`.
    pub fn map_singular_values(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= f(self.s[j]);
        }
        us * self.v.transpose()
    }
}

pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    ensure_finite(a)?;
    let (rows, cols) = a.shape();
    let p = rows.min(cols);
    if p == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let view = ArrayView2::from_shape((rows, cols).f(), a.as_slice()).expect("column-major layout");
    let (u, s, v_t) = match view.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(v_t))) => (u, s, v_t),
        _ => return Err(Error::SvdNotConverged { rows, cols }),
    };
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdNotConverged { rows, cols });
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut su = DenseMatrix::zeros(rows, p);
    let mut sv = DenseMatrix::zeros(cols, p);
    let mut ss = DVector::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        // a negative singular value is absorbed into v
        let sign = if s[src] < 0.0 { -1.0 } else { 1.0 };
        ss[dst] = s[src].abs();
        su.column_mut(dst).iter_mut().zip(u.column(src)).for_each(|(d, &x)| *d = x);
        sv.column_mut(dst).iter_mut().zip(v_t.row(src)).for_each(|(d, &x)| *d = sign * x);
    }
    Ok(SvdFactors { u: su, s: ss, v: sv })
}

/// Best rank-`r` approximation `sum_{j<r} s_j u_j v_j^T`.
pub fn truncate_rank(f: &SvdFactors, r: usize) -> DenseMatrix {
    let r = r.min(f.s.len());
    let mut us = f.u.columns(0, r).into_owned();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= f.s[j];
    }
    us * f.v.columns(0, r).transpose()
}

#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    let m = x.abs() - tau;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Elementwise shrinkage `sign(x) * max(|x| - tau, 0)`.
pub fn soft_threshold(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    debug_assert!(tau >= 0.0);
    a.map(|x| shrink(x, tau))
}

/// Singular value thresholding: soft-threshold the spectrum of `a`.
pub fn svt(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::Config(format!("svt threshold must be >= 0, got {tau}")));
    }
    Ok(svd(a)?.map_singular_values(|s| shrink(s, tau)))
}

/// Normalized `side x side` Gaussian window centred on the middle pixel.
pub fn gaussian_window(side: usize, sigma: f64) -> Result<DenseMatrix> {
    if side % 2 == 0 {
        return Err(Error::Config(format!("window side must be odd, got {side}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("window sigma must be > 0, got {sigma}")));
    }
    let half = (side / 2) as f64;
    let mut w = DenseMatrix::from_fn(side, side, |i, j| {
        let dy = i as f64 - half;
        let dx = j as f64 - half;
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    });
    let total = w.sum();
    w /= total;
    Ok(w)
}

/// Minimum-norm least-squares solution of `a * x = b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DenseMatrix,
    /// `a` had numerical rank below `min(rows, cols)`.
    pub rank_deficient: bool,
}

pub fn least_squares(a: &DenseMatrix, b: &DenseMatrix) -> Result<LeastSquares> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "least squares: lhs has {} rows, rhs has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let n = a.ncols();
    let f = svd(a)?;
    let p = f.s.len();
    let cutoff = f.s.iter().next().copied().unwrap_or(0.0)
        * (a.nrows().max(n) as f64)
        * f64::EPSILON;
    let kept: Vec<usize> = (0..p).filter(|&j| f.s[j] > cutoff && f.s[j] > 0.0).collect();

    // x = V_k diag(1/s_k) U_k^T b
    let mut ut_b = DenseMatrix::zeros(kept.len(), b.ncols());
    for (row, &j) in kept.iter().enumerate() {
        let coef = f.u.column(j).transpose() * b;
        ut_b.set_row(row, &(coef / f.s[j]));
    }
    let mut v_k = DenseMatrix::zeros(n, kept.len());
    for (col, &j) in kept.iter().enumerate() {
        v_k.set_column(col, &f.v.column(j));
    }
    Ok(LeastSquares {
        solution: v_k * ut_b,
        rank_deficient: kept.len() < n,
    })
}

pub fn numerical_rank(a: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    Ok(svd(a)?.rank(rel_tol))
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(svd(a)?.s.iter().next().copied().unwrap_or(0.0))
}

/// Concatenates two matrices with the same number of rows side by side.
pub fn hstack(left: &DenseMatrix, right: &DenseMatrix) -> Result<DenseMatrix> {
    if left.nrows() != right.nrows() {
        return Err(Error::Shape(format!(
            "hstack: {} rows vs {} rows",
            left.nrows(),
            right.nrows()
        )));
    }
    let mut out = DenseMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn assert_orthonormal(q: &DenseMatrix) {
        let g = q.transpose() * q;
        let eye = DenseMatrix::identity(q.ncols(), q.ncols());
        assert!((g - eye).amax() < 1e-10);
    }

    #[test]
    fn svd_of_identity_and_diagonal() {
        let f = svd(&DenseMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.s.as_slice(), &[1.0, 1.0, 1.0]);

        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let f = svd(&d).unwrap();
        for (got, want) in f.s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for (r, c, seed) in [(6, 4, 1), (4, 6, 2), (30, 7, 3), (5, 40, 4)] {
            let a = random(r, c, seed);
            let f = svd(&a).unwrap();
            assert_eq!(f.s.len(), r.min(c));
            assert!(f.s.iter().zip(f.s.iter().skip(1)).all(|(a, b)| a >= b));
            assert!(f.s.iter().all(|&x| x >= 0.0));
            assert_orthonormal(&f.u);
            assert_orthonormal(&f.v);
            assert!((f.reconstruct() - &a).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite)));
    }

    #[test]
    fn truncation_examples() {
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let f = svd(&d).unwrap();
        let t1 = truncate_rank(&f, 1);
        let mut want = DenseMatrix::zeros(3, 3);
        want[(0, 0)] = 3.0;
        assert!((t1 - want).amax() < 1e-14);
        assert_eq!(truncate_rank(&f, 0), DenseMatrix::zeros(3, 3));
        assert!((truncate_rank(&f, 10) - &d).amax() < 1e-14);
    }

    #[test]
    fn truncation_error_matches_tail_energy() {
        let a = random(8, 6, 11);
        let f = svd(&a).unwrap();
        let err = (&a - truncate_rank(&f, 3)).norm();
        let tail = (f.s[3].powi(2) + f.s[4].powi(2) + f.s[5].powi(2)).sqrt();
        assert!((err - tail).abs() < 1e-10);
    }

    #[test]
    fn soft_threshold_examples() {
        let a = DenseMatrix::from_row_slice(1, 3, &[2.0, -0.5, 0.0]);
        assert_eq!(
            soft_threshold(&a, 1.0),
            DenseMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])
        );
        let b = random(4, 5, 3);
        assert_eq!(soft_threshold(&b, 0.0), b);
    }

    #[test]
    fn soft_threshold_matches_loop() {
        let a = random(7, 9, 5);
        let out = soft_threshold(&a, 0.4);
        for i in 0..7 {
            for j in 0..9 {
                let x = a[(i, j)];
                let want = if x > 0.4 {
                    x - 0.4
                } else if x < -0.4 {
                    x + 0.4
                } else {
                    0.0
                };
                assert_eq!(out[(i, j)], want);
            }
        }
    }

    #[test]
    fn svt_examples() {
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let out = svt(&d, 1.5).unwrap();
        let want = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.5, 0.0]));
        assert!((out - want).amax() < 1e-12);

        let a = random(10, 8, 9);
        assert!((svt(&a, 0.0).unwrap() - &a).amax() < 1e-10);

        let s = svd(&a).unwrap().s;
        let tau = s[2] + 1e-9;
        let above = s.iter().filter(|&&x| x > tau).count();
        assert_eq!(above, 2);
        let rank = numerical_rank(&svt(&a, tau).unwrap(), 1e-10).unwrap();
        assert!(rank <= 2);
    }

    #[test]
    fn gaussian_window_examples() {
        assert_eq!(gaussian_window(1, 1.5).unwrap(), DenseMatrix::from_element(1, 1, 1.0));
        let w = gaussian_window(11, 1.5).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        let w3 = gaussian_window(3, 1.5).unwrap();
        let ratio = w3[(1, 1)] / w3[(0, 0)];
        assert!((ratio - (1.0f64 / 2.25).exp()).abs() < 1e-12);
        assert!(gaussian_window(4, 1.5).is_err());
        assert!(gaussian_window(3, 0.0).is_err());
    }

    #[test]
    fn gaussian_window_symmetries() {
        let w = gaussian_window(11, 1.5).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(w[(i, j)], w[(10 - i, j)]);
                assert_eq!(w[(i, j)], w[(i, 10 - j)]);
                assert_eq!(w[(i, j)], w[(j, i)]);
            }
        }
    }

    #[test]
    fn least_squares_full_rank_and_min_norm() {
        let a = random(9, 3, 21);
        let b = random(9, 2, 22);
        let ls = least_squares(&a, &b).unwrap();
        assert!(!ls.rank_deficient);
        // normal equations oracle
        let ata = a.transpose() * &a;
        let x = ata.try_inverse().unwrap() * a.transpose() * &b;
        assert!((ls.solution - x).amax() < 1e-10);

        // duplicated column: minimum-norm solution splits the weight evenly
        let col = random(5, 1, 23);
        let dup = hstack(&col, &col).unwrap();
        let ls = least_squares(&dup, &(&col * 2.0)).unwrap();
        assert!(ls.rank_deficient);
        assert!((ls.solution[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((ls.solution[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sized_inputs() {
        let f = svd(&DenseMatrix::zeros(4, 0)).unwrap();
        assert_eq!(f.s.len(), 0);
        assert_eq!(truncate_rank(&f, 2).shape(), (4, 0));
    }
}
