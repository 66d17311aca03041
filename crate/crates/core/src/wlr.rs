//! Weighted low-rank approximation with weight `W = (W1 1)`.
//!
//! The rank-`r` approximation `X = (X1, X2)` is parametrized as
//! `X2 = X1 C + B D`, where `X1` is `m x k`, `C` is `k x (n-k)`, `B` is
//! `m x (r-k)` and `D` is `(r-k) x (n-k)`. The solver minimizes
//!
//! ```text
//! F(X1, C, B, D) = ||(A1 - X1) ⊙ W1||_F^2 + ||A2 - X1 C - B D||_F^2
//! ```
//!
//! by exact block coordinate descent in the order `X1, C, B, D`. Every block
//! update is the exact minimizer of its least-squares subproblem, so the
//! objective never increases.
//!
//! Also provided are the two closed-form special cases: the penalized
//! problem `min λ²||A1 - B1||² + ||A2 - B2||²` over rank-`r` `B` (one SVD of
//! `(λ A1, A2)`) and its `λ → ∞` limit where the first block is kept fixed.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, hstack, least_squares, svd, truncate_rank, DenseMatrix, LeastSquares};

/// Below this norm the relative stopping criterion is skipped.
const TINY_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WlrConfig {
    /// Target rank `r` of the approximation.
    pub rank: usize,
    /// Number of columns in the first block `A1`.
    pub k: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Record the objective after every block update, not only per sweep.
    #[serde(default)]
    pub record_substeps: bool,
}

impl WlrConfig {
    pub fn new(rank: usize, k: usize) -> Self {
        WlrConfig {
            rank,
            k,
            epsilon: 1e-7,
            max_iter: 50,
            seed: 0,
            record_substeps: false,
        }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let Self { rank, k, .. } = *self;
        if k == 0 || k > rank || rank > m.min(n) || k > n {
            return Err(Error::Config(format!(
                "need 0 < k <= r <= min(m, n); got k={k}, r={rank}, m={m}, n={n}"
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Strictly positive weights `W1` for the first block. The weight on the
/// second block is implicitly all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBlock {
    w1: DenseMatrix,
}

impl WeightBlock {
    pub fn new(w1: DenseMatrix) -> Result<Self> {
        if w1.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("every entry of W1 must be finite and > 0".into()));
        }
        Ok(WeightBlock { w1 })
    }

    pub fn ones(m: usize, k: usize) -> Self {
        WeightBlock {
            w1: DenseMatrix::from_element(m, k, 1.0),
        }
    }

    /// I.i.d. uniform weights on `[low, high]`.
    pub fn uniform(m: usize, k: usize, low: f64, high: f64, seed: u64) -> Result<Self> {
        if !(low > 0.0) || !(high >= low) || !high.is_finite() {
            return Err(Error::Config(format!(
                "weight range must satisfy 0 < low <= high, got [{low}, {high}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(low, high)
            .map_err(|e| Error::Config(format!("weight range: {e}")))?;
        Ok(WeightBlock {
            w1: DenseMatrix::from_fn(m, k, |_, _| rng.sample(dist)),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.w1
    }
}

/// Factor blocks and iteration bookkeeping of the alternating solver.
#[derive(Debug, Clone)]
pub struct WlrState {
    pub x1: DenseMatrix,
    pub c: DenseMatrix,
    pub b: DenseMatrix,
    pub d: DenseMatrix,
    pub iteration: usize,
    /// Objective at the initial point.
    pub initial_objective: f64,
    /// Objective after each full sweep.
    pub objective_history: Vec<f64>,
    /// Objective after each block update (only with `record_substeps`).
    pub substep_objectives: Vec<f64>,
    /// `||X_{p+1} - X_p||_F` per sweep.
    pub error_history: Vec<f64>,
    /// `||X_{p+1} - X_p||_F / ||X_p||_F` per sweep (NaN when skipped).
    pub relative_error_history: Vec<f64>,
    /// Some least-squares block update met a rank-deficient system and used
    /// the minimum-norm solution.
    pub rank_deficient: bool,
    pub converged: bool,
}

impl WlrState {
    pub fn from_blocks(x1: DenseMatrix, c: DenseMatrix, b: DenseMatrix, d: DenseMatrix) -> Result<Self> {
        let (m, k) = x1.shape();
        let n2 = c.ncols();
        let extra = b.ncols();
        if c.nrows() != k || b.nrows() != m || d.shape() != (extra, n2) {
            return Err(Error::Shape(format!(
                "blocks x1 {:?}, c {:?}, b {:?}, d {:?} are not conformal",
                x1.shape(),
                c.shape(),
                b.shape(),
                d.shape()
            )));
        }
        Ok(WlrState {
            x1,
            c,
            b,
            d,
            iteration: 0,
            initial_objective: f64::NAN,
            objective_history: Vec::new(),
            substep_objectives: Vec::new(),
            error_history: Vec::new(),
            relative_error_history: Vec::new(),
            rank_deficient: false,
            converged: false,
        })
    }

    /// `X1` and `D` standard normal, `B` and `C` zero.
    pub fn initial(m: usize, n: usize, config: &WlrConfig) -> Self {
        let (k, r) = (config.k, config.rank);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let x1 = DenseMatrix::from_fn(m, k, |_, _| rng.sample(StandardNormal));
        let d = DenseMatrix::from_fn(r - k, n - k, |_, _| rng.sample(StandardNormal));
        WlrState::from_blocks(
            x1,
            DenseMatrix::zeros(k, n - k),
            DenseMatrix::zeros(m, r - k),
            d,
        )
        .expect("initial blocks are conformal")
    }

    pub fn k(&self) -> usize {
        self.x1.ncols()
    }

    pub fn rank(&self) -> usize {
        self.x1.ncols() + self.b.ncols()
    }

    /// `X2 = X1 C + B D`.
    pub fn second_block(&self) -> DenseMatrix {
        &self.x1 * &self.c + &self.b * &self.d
    }

    /// `X = (X1, X1 C + B D)`.
    pub fn approximation(&self) -> DenseMatrix {
        hstack(&self.x1, &self.second_block()).expect("blocks share the row count")
    }
}

fn check_shapes(a1: &DenseMatrix, a2: &DenseMatrix, state: &WlrState) -> Result<()> {
    let (m, k) = a1.shape();
    if a2.nrows() != m || state.x1.shape() != (m, k) || state.c.ncols() != a2.ncols() {
        return Err(Error::Shape(format!(
            "data blocks {:?}/{:?} do not match factors x1 {:?}, c {:?}",
            a1.shape(),
            a2.shape(),
            state.x1.shape(),
            state.c.shape()
        )));
    }
    Ok(())
}

fn check_weights(a1: &DenseMatrix, w1: &WeightBlock) -> Result<()> {
    if w1.w1.shape() != a1.shape() {
        return Err(Error::Shape(format!(
            "W1 is {:?} but A1 is {:?}",
            w1.w1.shape(),
            a1.shape()
        )));
    }
    Ok(())
}

/// `||(A1 - X1) ⊙ W1||_F^2 + ||A2 - X1 C - B D||_F^2`.
pub fn objective(a1: &DenseMatrix, a2: &DenseMatrix, state: &WlrState, w1: &WeightBlock) -> Result<f64> {
    check_shapes(a1, a2, state)?;
    check_weights(a1, w1)?;
    let first = (a1 - &state.x1).component_mul(&w1.w1).norm_squared();
    let second = (a2 - state.second_block()).norm_squared();
    Ok(first + second)
}

/// Row-wise exact minimizer over `X1`:
/// `X1(i,:) = E(i,:) (diag(W1(i,:)^2) + C C^T)^{-1}` with
/// `E = A1 ⊙ W1 ⊙ W1 + (A2 - B D) C^T`.
pub fn update_x1(state: &WlrState, a1: &DenseMatrix, a2: &DenseMatrix, w1: &WeightBlock) -> Result<DenseMatrix> {
    check_shapes(a1, a2, state)?;
    check_weights(a1, w1)?;
    let (m, k) = a1.shape();
    let w_sq = w1.w1.component_mul(&w1.w1);
    let e = a1.component_mul(&w_sq) + (a2 - &state.b * &state.d) * state.c.transpose();
    let cct = &state.c * state.c.transpose();

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut sys = cct.clone();
            for j in 0..k {
                sys[(j, j)] += w_sq[(i, j)];
            }
            let chol = Cholesky::new(sys).ok_or(Error::SingularSystem { row: i })?;
            let rhs = e.row(i).transpose();
            Ok(chol.solve(&rhs).iter().copied().collect())
        })
        .collect::<Result<_>>()?;

    Ok(DenseMatrix::from_fn(m, k, |i, j| rows[i][j]))
}

/// Exact minimizer over `C` of `||(A2 - B D) - X1 C||_F`.
pub fn update_c(state: &WlrState, a2: &DenseMatrix) -> Result<LeastSquares> {
    let target = a2 - &state.b * &state.d;
    least_squares(&state.x1, &target)
}

/// Exact minimizer over `B` of `||(A2 - X1 C) - B D||_F`.
pub fn update_b(state: &WlrState, a2: &DenseMatrix) -> Result<LeastSquares> {
    if state.b.ncols() == 0 {
        return Ok(LeastSquares {
            solution: state.b.clone(),
            rank_deficient: false,
        });
    }
    let residual = a2 - &state.x1 * &state.c;
    let t = least_squares(&state.d.transpose(), &residual.transpose())?;
    Ok(LeastSquares {
        solution: t.solution.transpose(),
        rank_deficient: t.rank_deficient,
    })
}

/// Exact minimizer over `D` of `||(A2 - X1 C) - B D||_F`.
pub fn update_d(state: &WlrState, a2: &DenseMatrix) -> Result<LeastSquares> {
    if state.b.ncols() == 0 {
        return Ok(LeastSquares {
            solution: state.d.clone(),
            rank_deficient: false,
        });
    }
    let residual = a2 - &state.x1 * &state.c;
    least_squares(&state.b, &residual)
}

/// One full sweep `X1 -> C -> B -> D`, returning the objective afterwards.
pub fn sweep(state: &mut WlrState, a1: &DenseMatrix, a2: &DenseMatrix, w1: &WeightBlock, record_substeps: bool) -> Result<f64> {
    state.x1 = update_x1(state, a1, a2, w1)?;
    if record_substeps {
        let f = objective(a1, a2, state, w1)?;
        state.substep_objectives.push(f);
    }
    if a2.ncols() > 0 {
        let updates: [fn(&WlrState, &DenseMatrix) -> Result<LeastSquares>; 3] = [update_c, update_b, update_d];
        for (slot, update) in updates.into_iter().enumerate() {
            let ls = update(state, a2)?;
            state.rank_deficient |= ls.rank_deficient;
            match slot {
                0 => state.c = ls.solution,
                1 => state.b = ls.solution,
                _ => state.d = ls.solution,
            }
            if record_substeps {
                let f = objective(a1, a2, state, w1)?;
                state.substep_objectives.push(f);
            }
        }
    }
    objective(a1, a2, state, w1)
}

/// Alternating minimization from the standard initialization.
///
/// Stops when `||X_{p+1} - X_p||_F < ε`, when that change relative to
/// `||X_p||_F` drops below `ε`, or after `max_iter` sweeps.
pub fn solve_wlr(
    a1: &DenseMatrix,
    a2: &DenseMatrix,
    w1: &WeightBlock,
    config: &WlrConfig,
) -> Result<(WlrState, Decomposition)> {
    ensure_finite(a1)?;
    ensure_finite(a2)?;
    let (m, k) = a1.shape();
    if a2.nrows() != m {
        return Err(Error::Shape(format!("A1 has {m} rows, A2 has {}", a2.nrows())));
    }
    if config.k != k {
        return Err(Error::Config(format!("config k={} but A1 has {k} columns", config.k)));
    }
    let n = k + a2.ncols();
    config.validate(m, n)?;
    check_weights(a1, w1)?;

    let mut state = WlrState::initial(m, n, config);
    state.initial_objective = objective(a1, a2, &state, w1)?;
    let mut x_prev = state.approximation();

    for p in 0..config.max_iter {
        let f = sweep(&mut state, a1, a2, w1, config.record_substeps)?;
        state.objective_history.push(f);
        state.iteration = p + 1;

        let x_next = state.approximation();
        let err = (&x_next - &x_prev).norm();
        let prev_norm = x_prev.norm();
        let rel = if prev_norm < TINY_NORM { f64::NAN } else { err / prev_norm };
        state.error_history.push(err);
        state.relative_error_history.push(rel);
        x_prev = x_next;
        if err < config.epsilon || rel < config.epsilon {
            state.converged = true;
            break;
        }
    }

    let a = hstack(a1, a2)?;
    let mut dec = Decomposition::from_background(Method::Wlr, &a, x_prev);
    dec.iterations = state.iteration;
    dec.converged = state.converged;
    Ok((state, dec))
}

fn check_blocks(a1: &DenseMatrix, a2: &DenseMatrix, r: usize) -> Result<()> {
    ensure_finite(a1)?;
    ensure_finite(a2)?;
    if a1.nrows() != a2.nrows() {
        return Err(Error::Shape(format!(
            "A1 has {} rows, A2 has {}",
            a1.nrows(),
            a2.nrows()
        )));
    }
    let p = a1.nrows().min(a1.ncols() + a2.ncols());
    if r > p {
        return Err(Error::Config(format!("rank {r} exceeds min(m, n) = {p}")));
    }
    Ok(())
}

/// Closed-form minimizer of `λ²||A1 - B1||_F² + ||A2 - B2||_F²` over
/// `rank(B) <= r`: truncate `(λ A1, A2)` and rescale the first block.
pub fn solve_gtls(a1: &DenseMatrix, a2: &DenseMatrix, lambda: f64, r: usize) -> Result<DenseMatrix> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
    }
    check_blocks(a1, a2, r)?;
    let k = a1.ncols();
    let scaled = hstack(&(a1 * lambda), a2)?;
    let mut b = truncate_rank(&svd(&scaled)?, r);
    b.columns_mut(0, k).scale_mut(1.0 / lambda);
    Ok(b)
}

pub fn gtls_objective(a1: &DenseMatrix, a2: &DenseMatrix, b: &DenseMatrix, lambda: f64) -> f64 {
    let k = a1.ncols();
    let first = (a1 - b.columns(0, k)).norm_squared();
    let second = (a2 - b.columns(k, a2.ncols())).norm_squared();
    lambda * lambda * first + second
}

/// Closed-form minimizer of `||A - B||_F` over `rank(B) <= r` with the first
/// block fixed to `A1`: `B2 = P A2 + [(I - P) A2]_{r - rank(A1)}` where `P`
/// projects onto the range of `A1`.
pub fn golub_solve(a1: &DenseMatrix, a2: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    check_blocks(a1, a2, r)?;
    let f = svd(a1)?;
    let rank_tol = a1.nrows().max(a1.ncols()) as f64 * f64::EPSILON;
    let q = f.rank(rank_tol);
    if r < q {
        return Err(Error::Infeasible(format!(
            "rank {r} is below rank(A1) = {q}; the first block cannot be preserved"
        )));
    }
    let basis = f.u.columns(0, q);
    let projected = basis * (basis.transpose() * a2);
    let orthogonal = a2 - &projected;
    let b2 = projected + truncate_rank(&svd(&orthogonal)?, r - q);
    hstack(a1, &b2)
}
