//! Self-supervised background estimation.
//!
//! A crude singular value thresholding split `A = B_in + F_in` scores every
//! frame by the share of its pixels that carry foreground. Frames whose score
//! is at most the most common score form the near-background set `S`; `k`
//! of them make up the heavily weighted first block of a weighted low-rank
//! solve over the rearranged matrix.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::frame_io::Dataset;
use crate::numerics::{ensure_finite, shrink, svd, DenseMatrix};
use crate::wlr::{solve_wlr, WeightBlock, WlrConfig, WlrState};

pub type LogicalMatrix = DMatrix<bool>;

/// `|b| > LB_TOL` counts as a background pixel.
pub const LB_TOL: f64 = 1e-12;
const HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Eps1Strategy {
    /// Otsu's between-class variance maximizer on a histogram of `|F_in|`.
    Otsu,
    /// Fixed percentile (in `[0, 100]`) of `|F_in|`.
    Percentile { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// `k = ceil(|S| / i1)`.
    pub i1: usize,
    /// `r = k + i2`.
    pub i2: usize,
    pub epsilon: f64,
    pub wlr_max_iter: usize,
    pub w1_low: f64,
    pub w1_high: f64,
    pub eps1_strategy: Eps1Strategy,
    /// Initial thresholding level as a fraction of the largest singular value.
    pub svt_tau: f64,
    /// Scores are rounded to multiples of this many percent before taking
    /// the mode; `0` uses the exact scores.
    pub score_quantum: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            i1: 2,
            i2: 1,
            epsilon: 1e-7,
            wlr_max_iter: 50,
            w1_low: 500.0,
            w1_high: 1000.0,
            eps1_strategy: Eps1Strategy::Otsu,
            svt_tau: 0.05,
            score_quantum: 0.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.i1 == 0 {
            return Err(Error::Config("i1 must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.wlr_max_iter == 0 {
            return Err(Error::Config("wlr_max_iter must be >= 1".into()));
        }
        if !(self.w1_low > 0.0) || !(self.w1_high >= self.w1_low) || !self.w1_high.is_finite() {
            return Err(Error::Config(format!(
                "weight range must satisfy 0 < w1_low <= w1_high, got [{}, {}]",
                self.w1_low, self.w1_high
            )));
        }
        if !(0.0..1.0).contains(&self.svt_tau) {
            return Err(Error::Config(format!("svt_tau must be in [0, 1), got {}", self.svt_tau)));
        }
        if !(self.score_quantum >= 0.0) || !self.score_quantum.is_finite() {
            return Err(Error::Config(format!("score_quantum must be >= 0, got {}", self.score_quantum)));
        }
        if let Eps1Strategy::Percentile { p } = self.eps1_strategy {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Config(format!("percentile must be in [0, 100], got {p}")));
            }
        }
        Ok(())
    }
}

/// What the pipeline learned about the frames. Indices are 0-based columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSelection {
    /// Near-background frames, ascending.
    pub s: Vec<usize>,
    pub eps1: f64,
    pub eps2: f64,
    /// Percentage score per frame; `+inf` (serialized as `null`) when the
    /// frame has no background pixels.
    pub scores: Vec<f64>,
    pub k: usize,
    pub r: usize,
    /// Frames placed in the first block, in block order.
    pub first_block: Vec<usize>,
    /// `permutation[j]` is the original column of rearranged column `j`.
    pub permutation: Vec<usize>,
    /// `inverse[permutation[j]] == j`.
    pub inverse: Vec<usize>,
}

/// Crude split by singular value thresholding at `tau_fraction * s_1`.
/// Returns `(B_in, F_in)` with `F_in = A - B_in`.
pub fn initial_decompose(a: &DenseMatrix, tau_fraction: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    ensure_finite(a)?;
    let f = svd(a)?;
    let tau = tau_fraction * f.s.iter().next().copied().unwrap_or(0.0);
    let b = f.map_singular_values(|s| shrink(s, tau));
    let fg = a - &b;
    Ok((b, fg))
}

/// Threshold separating near-zero residual mass from foreground mass in
/// `|F_in|`. A constant `|F_in|` gives `0`.
pub fn select_eps1(f_in: &DenseMatrix, strategy: Eps1Strategy) -> f64 {
    let mut v: Vec<f64> = f_in.iter().map(|x| x.abs()).collect();
    let max = v.iter().copied().fold(0.0, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if v.is_empty() || max == min {
        return 0.0;
    }
    match strategy {
        Eps1Strategy::Otsu => otsu(&v, max),
        Eps1Strategy::Percentile { p } => {
            v.sort_by(f64::total_cmp);
            let pos = p / 100.0 * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        }
    }
}

fn otsu(values: &[f64], max: f64) -> f64 {
    let width = max / HISTOGRAM_BINS as f64;
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &x in values {
        let bin = ((x / width) as usize).min(HISTOGRAM_BINS - 1);
        hist[bin] += 1;
    }
    let total = values.len() as f64;
    let centre = |b: usize| (b as f64 + 0.5) * width;
    let sum_all: f64 = (0..HISTOGRAM_BINS).map(|b| hist[b] as f64 * centre(b)).sum();

    // maximize w0 w1 (mu0 - mu1)^2 over split points after bin `b`
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    let mut best_bins: Vec<usize> = Vec::new();
    for b in 0..HISTOGRAM_BINS - 1 {
        w0 += hist[b] as f64;
        sum0 += hist[b] as f64 * centre(b);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let d = sum0 / w0 - (sum_all - sum0) / w1;
        let between = w0 * w1 * d * d;
        match between.partial_cmp(&best) {
            Some(Ordering::Greater) => {
                best = between;
                best_bins = vec![b];
            }
            Some(Ordering::Equal) => best_bins.push(b),
            _ => {}
        }
    }
    if best_bins.is_empty() {
        return 0.0;
    }
    // upper edge of the split bin; ties resolve to the middle of the plateau
    let lo = best_bins[0];
    let hi = best_bins[best_bins.len() - 1];
    (lo + hi + 2) as f64 * width / 2.0
}

/// `lf = |F_in| > eps1`, `lb = |B_in| > LB_TOL`.
pub fn binarize(f_in: &DenseMatrix, b_in: &DenseMatrix, eps1: f64) -> (LogicalMatrix, LogicalMatrix) {
    (
        f_in.map(|x| x.abs() > eps1),
        b_in.map(|x| x.abs() > LB_TOL),
    )
}

/// `100 * (on-pixels of lf column j) / (on-pixels of lb column j)`, or
/// `+inf` when column `j` of `lb` is empty.
pub fn percentage_scores(lf: &LogicalMatrix, lb: &LogicalMatrix) -> Vec<f64> {
    lf.column_iter()
        .zip(lb.column_iter())
        .map(|(f, b)| {
            let nb = b.iter().filter(|&&x| x).count();
            if nb == 0 {
                f64::INFINITY
            } else {
                100.0 * f.iter().filter(|&&x| x).count() as f64 / nb as f64
            }
        })
        .collect()
}

fn quantize(x: f64, quantum: f64) -> f64 {
    if quantum > 0.0 {
        (x / quantum).round() * quantum
    } else {
        x
    }
}

/// `eps2` is the most frequent score after rounding to multiples of
/// `quantum` (ties go to the smaller score); `S` holds every frame whose
/// rounded score is `<= eps2`.
pub fn select_frames(scores: &[f64], quantum: f64) -> Result<(Vec<usize>, f64)> {
    let rounded: Vec<f64> = scores.iter().filter(|s| s.is_finite()).map(|&s| quantize(s, quantum)).collect();
    if rounded.is_empty() {
        return Err(Error::NoBackgroundEvidence);
    }
    let mut sorted = rounded.clone();
    sorted.sort_by(f64::total_cmp);
    let (mut eps2, mut best) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].partition_point(|&x| x == sorted[i]) + i;
        if j - i > best {
            best = j - i;
            eps2 = sorted[i];
        }
        i = j;
    }
    let s = scores
        .iter()
        .enumerate()
        .filter(|(_, &x)| x.is_finite() && quantize(x, quantum) <= eps2)
        .map(|(j, _)| j)
        .collect();
    Ok((s, eps2))
}

/// Orders columns by score, then by content, so the rearrangement does not
/// depend on the input frame order.
fn canonical_order(a: &DenseMatrix, scores: &[f64], cols: &mut [usize]) {
    cols.sort_by(|&x, &y| {
        scores[x].total_cmp(&scores[y]).then_with(|| {
            a.column(x)
                .iter()
                .zip(a.column(y).iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
}

/// The full self-supervised decomposition. Output columns follow the input
/// frame order.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<(Decomposition, FrameSelection, WlrState)> {
    config.validate()?;
    let a = &dataset.frames;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Shape("dataset is empty".into()));
    }

    let (b_in, f_in) = initial_decompose(a, config.svt_tau)?;
    let eps1 = select_eps1(&f_in, config.eps1_strategy);
    let (lf, lb) = binarize(&f_in, &b_in, eps1);
    let scores = percentage_scores(&lf, &lb);
    let (s, eps2) = select_frames(&scores, config.score_quantum)?;

    let k = s.len().div_ceil(config.i1);
    let r = k + config.i2;
    if r > m.min(n) {
        return Err(Error::Config(format!(
            "|S| = {} gives k = {k}, r = {r}, which exceeds min(m, n) = {}",
            s.len(),
            m.min(n)
        )));
    }

    let mut pool = s.clone();
    canonical_order(a, &scores, &mut pool);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    let first_block: Vec<usize> = picked.iter().map(|&i| pool[i]).collect();

    let mut rest: Vec<usize> = (0..n).filter(|j| !first_block.contains(j)).collect();
    canonical_order(a, &scores, &mut rest);
    let permutation: Vec<usize> = first_block.iter().chain(rest.iter()).copied().collect();
    let mut inverse = vec![0; n];
    for (j, &p) in permutation.iter().enumerate() {
        inverse[p] = j;
    }

    let a1 = a.select_columns(&first_block);
    let a2 = a.select_columns(&rest);
    let w1 = WeightBlock::uniform(m, k, config.w1_low, config.w1_high, config.seed.wrapping_add(1))?;
    let wcfg = WlrConfig {
        epsilon: config.epsilon,
        max_iter: config.wlr_max_iter,
        seed: config.seed.wrapping_add(2),
        ..WlrConfig::new(r, k)
    };
    let (state, _) = solve_wlr(&a1, &a2, &w1, &wcfg)?;

    let x_tilde = state.approximation();
    let mut background = DenseMatrix::zeros(m, n);
    for (j, &p) in permutation.iter().enumerate() {
        background.set_column(p, &x_tilde.column(j));
    }
    let mut dec = Decomposition::from_background(Method::WlrPipeline, a, background);
    dec.thresholded_foreground = Some(dec.foreground.map(|x| if x.abs() <= eps1 { 0.0 } else { x }));
    dec.iterations = state.iteration;
    dec.converged = state.converged;
    dec.svd_count = 1;

    let selection = FrameSelection {
        s,
        eps1,
        eps2,
        scores,
        k,
        r,
        first_block,
        permutation,
        inverse,
    };
    Ok((dec, selection, state))
}
