//! Foreground evaluation: ROC sweep, MSE/PSNR and SSIM.
//!
//! Scores are computed on `|F|` against binary `{0, 255}` masks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{devectorize, Dataset};
use crate::numerics::{gaussian_window, DenseMatrix};

/// Largest 8-bit pixel value.
pub const PEAK: f64 = 255.0;
pub const DEFAULT_THRESHOLDS: usize = 100;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tpr: f64,
    pub fpr: f64,
}

impl RocPoint {
    fn from_counts(threshold: f64, tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        RocPoint {
            threshold,
            tp,
            fp,
            tn,
            fn_,
            tpr: ratio(tp, fn_),
            fpr: ratio(fp, tn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// `n` evenly spaced values from `0` to `PEAK` inclusive.
pub fn thresholds(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| PEAK * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_pair(f: &DenseMatrix, g: &DenseMatrix) -> Result<()> {
    if f.shape() != g.shape() {
        return Err(Error::Shape(format!(
            "foreground is {:?}, ground truth is {:?}",
            f.shape(),
            g.shape()
        )));
    }
    Ok(())
}

fn sweep_counts<'a>(
    pairs: impl Iterator<Item = (&'a f64, &'a f64)> + Clone,
    ts: &[f64],
) -> Vec<RocPoint> {
    // sort |F| of positives and negatives once, then count by binary search
    let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (&f, &g) in pairs {
        if g > 0.0 {
            pos.push(f.abs());
        } else {
            neg.push(f.abs());
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let above = |v: &[f64], t: f64| (v.len() - v.partition_point(|&x| x <= t)) as u64;
    ts.iter()
        .map(|&t| {
            let tp = above(&pos, t);
            let fp = above(&neg, t);
            RocPoint::from_counts(t, tp, fp, neg.len() as u64 - fp, pos.len() as u64 - tp)
        })
        .collect()
}

/// Trapezoid area under `(fpr, tpr)` points, with the corners `(0, 0)` and
/// `(1, 1)` added.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    xy.push((0.0, 0.0));
    xy.push((1.0, 1.0));
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    xy.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Pooled ROC over all pixels and frames: a pixel is predicted foreground
/// when `|F| > t`.
pub fn roc_sweep(foreground: &DenseMatrix, ground_truth: &DenseMatrix, n_thresholds: usize) -> Result<RocCurve> {
    check_pair(foreground, ground_truth)?;
    if !ground_truth.iter().any(|&g| g > 0.0) {
        return Err(Error::NoPositives);
    }
    let points = sweep_counts(foreground.iter().zip(ground_truth.iter()), &thresholds(n_thresholds));
    let auc = trapezoid_auc(&points);
    Ok(RocCurve { points, auc })
}

/// ROC of each frame separately; `None` for frames without positives.
pub fn roc_per_frame(
    foreground: &DenseMatrix,
    ground_truth: &DenseMatrix,
    n_thresholds: usize,
) -> Result<Vec<Option<RocCurve>>> {
    check_pair(foreground, ground_truth)?;
    let ts = thresholds(n_thresholds);
    Ok((0..foreground.ncols())
        .map(|j| {
            let g = ground_truth.column(j);
            if !g.iter().any(|&v| v > 0.0) {
                return None;
            }
            let points = sweep_counts(foreground.column(j).iter().zip(g.iter()), &ts);
            let auc = trapezoid_auc(&points);
            Some(RocCurve { points, auc })
        })
        .collect())
}

/// Area under the ROC taken over every possible threshold: the probability
/// that a random positive pixel has larger `|F|` than a random negative one,
/// ties counting one half.
pub fn rank_auc(foreground: &DenseMatrix, ground_truth: &DenseMatrix) -> Result<f64> {
    check_pair(foreground, ground_truth)?;
    let mut scored: Vec<(f64, bool)> = foreground
        .iter()
        .zip(ground_truth.iter())
        .map(|(&f, &g)| (f.abs(), g > 0.0))
        .collect();
    let n_pos = scored.iter().filter(|s| s.1).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    if n_neg == 0 {
        return Ok(1.0);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut wins = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let pos_tied = scored[i..j].iter().filter(|s| s.1).count();
        let neg_tied = (j - i) - pos_tied;
        wins += pos_tied as f64 * (neg_below as f64 + 0.5 * neg_tied as f64);
        neg_below += neg_tied;
        i = j;
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}

/// Mean squared difference over the pixels of one frame.
pub fn mse(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len(), "mse: length mismatch");
    if f.is_empty() {
        return 0.0;
    }
    f.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / f.len() as f64
}

/// `10 log10(255² / mse)`, `+inf` when the frames agree.
pub fn psnr(f: &[f64], g: &[f64]) -> f64 {
    let e = mse(f, g);
    if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / e).log10()
    }
}

/// SSIM index over every fully contained `window x window` position, so a
/// `h x w` input gives a `(h - window + 1) x (w - window + 1)` map.
pub fn ssim_map(x: &DenseMatrix, y: &DenseMatrix, window: usize, sigma: f64) -> Result<DenseMatrix> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!("ssim: {:?} vs {:?}", x.shape(), y.shape())));
    }
    let (h, w) = x.shape();
    if h < window || w < window {
        return Err(Error::Shape(format!("ssim: {h}x{w} frame is smaller than the {window}x{window} window")));
    }
    let g = gaussian_window(window, sigma)?;
    let (mh, mw) = (h - window + 1, w - window + 1);
    let mut map = DenseMatrix::zeros(mh, mw);
    for j in 0..mw {
        for i in 0..mh {
            let (mut mx, mut my) = (0.0, 0.0);
            for b in 0..window {
                for a in 0..window {
                    let wt = g[(a, b)];
                    mx += wt * x[(i + a, j + b)];
                    my += wt * y[(i + a, j + b)];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for b in 0..window {
                for a in 0..window {
                    let wt = g[(a, b)];
                    let dx = x[(i + a, j + b)] - mx;
                    let dy = y[(i + a, j + b)] - my;
                    vx += wt * dx * dx;
                    vy += wt * dy * dy;
                    cxy += wt * dx * dy;
                }
            }
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
            map[(i, j)] = num / den;
        }
    }
    Ok(map)
}

/// Mean of the SSIM map with the standard 11x11, σ = 1.5 window.
pub fn mssim(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    Ok(ssim_map(x, y, SSIM_WINDOW, SSIM_SIGMA)?.mean())
}

/// Per-frame `(tp, fp)` of the mask `|F| > eps1`.
pub fn tp_fp_counts(foreground: &DenseMatrix, ground_truth: &DenseMatrix, eps1: f64) -> Result<Vec<(u64, u64)>> {
    check_pair(foreground, ground_truth)?;
    Ok(foreground
        .column_iter()
        .zip(ground_truth.column_iter())
        .map(|(f, g)| {
            f.iter().zip(g.iter()).fold((0, 0), |(tp, fp), (&fv, &gv)| {
                match (fv.abs() > eps1, gv > 0.0) {
                    (true, true) => (tp + 1, fp),
                    (true, false) => (tp, fp + 1),
                    _ => (tp, fp),
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub per_frame_mse: Vec<f64>,
    pub per_frame_psnr: Vec<f64>,
    pub per_frame_mssim: Vec<f64>,
    pub ssim_maps: Option<Vec<DenseMatrix>>,
}

/// Scores a foreground against the dataset masks: the ROC sweep on `|F|`,
/// the per-frame quality measures on `|F_q|`, where `F_q` is `F` with its
/// noise floor removed (or `F` itself).
pub fn evaluate(
    foreground: &DenseMatrix,
    quality_foreground: &DenseMatrix,
    dataset: &Dataset,
    keep_maps: bool,
) -> Result<MetricsReport> {
    let gt = dataset.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    check_pair(foreground, gt)?;
    check_pair(quality_foreground, gt)?;
    let roc = roc_sweep(foreground, gt, DEFAULT_THRESHOLDS)?;
    let abs_f = quality_foreground.abs();
    let (h, w) = (dataset.height, dataset.width);

    let per_frame: Vec<(f64, f64, DenseMatrix)> = (0..abs_f.ncols())
        .into_par_iter()
        .map(|j| {
            let f = abs_f.column(j);
            let g = gt.column(j);
            let (f, g) = (f.as_slice(), g.as_slice());
            let map = ssim_map(&devectorize(f, h, w), &devectorize(g, h, w), SSIM_WINDOW, SSIM_SIGMA)?;
            Ok((mse(f, g), psnr(f, g), map))
        })
        .collect::<Result<_>>()?;

    Ok(MetricsReport {
        roc: roc.points,
        auc: roc.auc,
        per_frame_mse: per_frame.iter().map(|p| p.0).collect(),
        per_frame_psnr: per_frame.iter().map(|p| p.1).collect(),
        per_frame_mssim: per_frame.iter().map(|p| p.2.mean()).collect(),
        ssim_maps: keep_maps.then(|| per_frame.into_iter().map(|p| p.2).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask() -> DenseMatrix {
        // 2 pixels x 2 frames
        DenseMatrix::from_column_slice(2, 2, &[255.0, 0.0, 0.0, 255.0])
    }

    #[test]
    fn perfect_foreground_has_unit_auc() {
        let g = mask();
        let roc = roc_sweep(&g, &g, 100).unwrap();
        assert_eq!(roc.auc, 1.0);
        for p in &roc.points[..99] {
            assert_eq!((p.tpr, p.fpr), (1.0, 0.0));
        }
        assert_eq!(rank_auc(&g, &g).unwrap(), 1.0);
    }

    #[test]
    fn hand_counted_sweep() {
        let g = mask();
        let f = DenseMatrix::from_column_slice(2, 2, &[10.0, -5.0, 0.0, 3.0]);
        let pts = sweep_counts(f.iter().zip(g.iter()), &[0.0, 4.0, 20.0]);
        // |F| = 10 (pos), 5 (neg), 0 (neg), 3 (pos)
        let counts: Vec<_> = pts.iter().map(|p| (p.tp, p.fp, p.tn, p.fn_)).collect();
        assert_eq!(counts, vec![(2, 1, 1, 0), (1, 1, 1, 1), (0, 0, 2, 2)]);
    }

    #[test]
    fn no_positives_is_an_error() {
        let z = DenseMatrix::zeros(3, 2);
        assert!(matches!(roc_sweep(&z, &z, 10), Err(Error::NoPositives)));
    }

    #[test]
    fn threshold_grid() {
        let t = thresholds(100);
        assert_eq!(t.len(), 100);
        assert_eq!((t[0], t[99]), (0.0, 255.0));
    }

    #[test]
    fn mse_and_psnr() {
        let a = [0.0, 0.0, 0.0];
        let b = [255.0, 255.0, 255.0];
        assert_eq!(mse(&a, &a), 0.0);
        assert_eq!(psnr(&a, &a), f64::INFINITY);
        assert_eq!(psnr(&a, &b), 0.0);
    }

    #[test]
    fn ssim_of_identical_frames_is_one() {
        let x = DenseMatrix::from_fn(20, 15, |i, j| ((i * 31 + j * 17) % 256) as f64);
        let m = ssim_map(&x, &x, 11, 1.5).unwrap();
        assert_eq!(m.shape(), (10, 5));
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ssim_rejects_small_frames() {
        let x = DenseMatrix::zeros(10, 40);
        assert!(ssim_map(&x, &x, 11, 1.5).is_err());
    }

    #[test]
    fn impulse_lowers_mssim_slightly() {
        let x = DenseMatrix::from_element(30, 30, 100.0);
        let mut y = x.clone();
        y[(15, 15)] = 200.0;
        let s = mssim(&x, &y).unwrap();
        assert!(s < 1.0 && s > 0.9, "{s}");
    }

    #[test]
    fn tp_fp_of_zero_and_perfect() {
        let g = mask();
        let z = DenseMatrix::zeros(2, 2);
        assert_eq!(tp_fp_counts(&z, &g, 1.0).unwrap(), vec![(0, 0), (0, 0)]);
        assert_eq!(tp_fp_counts(&g, &g, 1.0).unwrap(), vec![(1, 0), (1, 0)]);
    }
}
