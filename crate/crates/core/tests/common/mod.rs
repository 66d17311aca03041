#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wlrbg::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn uniform(rng: &mut ChaCha8Rng, m: usize, n: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(lo..hi))
}

pub fn low_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> DenseMatrix {
    randn(rng, m, r) * randn(rng, r, n)
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let scale = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}

/// Least-squares solution of a full-column-rank system by Householder QR.
pub fn lstsq(m: &DenseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
    assert!(m.nrows() >= m.ncols());
    let qr = m.clone().qr();
    let qtb = qr.q().transpose() * rhs;
    qr.r().solve_upper_triangular(&qtb).expect("rank-deficient oracle system")
}

/// Column-major vectorization as an `mn x 1` matrix.
pub fn vec_of(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_column_slice(a.len(), 1, a.as_slice())
}

pub fn unvec(v: &DenseMatrix, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Rank-2 plus 5% sparse (+-10) instance on a 40x30 grid:
/// returns `(A, L, S)`.
pub fn planted_rpca(seed: u64) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let mut rng = rng(seed);
    let (m, n) = (40, 30);
    let l = randn(&mut rng, m, 2) * randn(&mut rng, 2, n);
    let count = m * n / 20;
    let mut s = DenseMatrix::zeros(m, n);
    let mut idx: Vec<usize> = (0..m * n).collect();
    for i in 0..count {
        let j = rng.random_range(i..m * n);
        idx.swap(i, j);
    }
    for &p in &idx[..count] {
        s[p] = if rng.random::<bool>() { 10.0 } else { -10.0 };
    }
    (&l + &s, l, s)
}

/// Windowed SSIM written out directly from the definition, one window at a
/// time, with its own Gaussian kernel.
pub fn brute_force_ssim(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let (side, sigma) = (11usize, 1.5f64);
    let half = (side / 2) as f64;
    let mut kernel = vec![vec![0.0; side]; side];
    let mut total = 0.0;
    for (a, row) in kernel.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let d2 = (a as f64 - half).powi(2) + (b as f64 - half).powi(2);
            *v = (-d2 / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (h, w) = x.shape();
    DenseMatrix::from_fn(h - side + 1, w - side + 1, |i, j| {
        let win = |m: &DenseMatrix| -> Vec<(f64, f64)> {
            let mut out = Vec::new();
            for a in 0..side {
                for b in 0..side {
                    out.push((kernel[a][b] / total, m[(i + a, j + b)]));
                }
            }
            out
        };
        let (wx, wy) = (win(x), win(y));
        let mean = |v: &[(f64, f64)]| v.iter().map(|(k, p)| k * p).sum::<f64>();
        let (mx, my) = (mean(&wx), mean(&wy));
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for ((k, px), (_, py)) in wx.iter().zip(&wy) {
            sxx += k * (px - mx).powi(2);
            syy += k * (py - my).powi(2);
            sxy += k * (px - mx) * (py - my);
        }
        ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    })
}
