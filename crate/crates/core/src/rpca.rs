//! Robust PCA baselines: `min ||A - B||_1 + λ ||B||_*` split as `A = B + F`
//! with low-rank `B` and sparse `F`.

use serde::{Deserialize, Serialize};

use crate::decomposition::{relative_residual, Decomposition, Method};
use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, shrink, soft_threshold, svd, DenseMatrix};

/// Continuation decay of the APG smoothing parameter.
pub const APG_DECAY: f64 = 0.95;
/// Floor of the APG smoothing parameter relative to `||A||_2`.
pub const APG_FLOOR: f64 = 1e-9;
/// Step parameter of APG (Lipschitz constant of the smooth term).
const APG_LIPSCHITZ: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcaConfig {
    /// Sparsity weight; `None` resolves to `1 / sqrt(max(m, n))`.
    pub lambda: Option<f64>,
    /// Initial augmented-Lagrangian penalty (iEALM).
    pub mu: f64,
    /// Penalty growth factor (iEALM).
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        RpcaConfig {
            lambda: None,
            mu: 1.5,
            rho: 1.25,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

impl RpcaConfig {
    pub fn resolved_lambda(&self, m: usize, n: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| 1.0 / (m.max(n).max(1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda must be > 0, got {l}")));
            }
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be > 1, got {}", self.rho)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of an RPCA solve.
#[derive(Debug, Clone, Default)]
pub struct RpcaTrace {
    /// Penalty (iEALM) or smoothing parameter (APG) used at each iteration.
    pub penalties: Vec<f64>,
    /// Stopping quantity at each iteration.
    pub criteria: Vec<f64>,
}

fn trivial(a: &DenseMatrix, method: Method) -> Decomposition {
    Decomposition {
        method,
        background: DenseMatrix::zeros(a.nrows(), a.ncols()),
        foreground: DenseMatrix::zeros(a.nrows(), a.ncols()),
        thresholded_foreground: None,
        iterations: 0,
        converged: true,
        svd_count: 0,
        residual: 0.0,
    }
}

pub fn solve_iealm(a: &DenseMatrix, config: &RpcaConfig) -> Result<Decomposition> {
    solve_iealm_traced(a, config).map(|(d, _)| d)
}

/// Inexact augmented Lagrange multiplier iteration:
///
/// ```text
/// F <- shrink(A - B + Y/μ, λ/μ)
/// B <- svt(A - F + Y/μ, 1/μ)
/// Y <- Y + μ (A - B - F),   μ <- ρ μ
/// ```
///
/// with `μ_0 = mu / ||A||_2`, until `||A - B - F||_F / ||A||_F < tol`.
pub fn solve_iealm_traced(a: &DenseMatrix, config: &RpcaConfig) -> Result<(Decomposition, RpcaTrace)> {
    config.validate()?;
    ensure_finite(a)?;
    let mut trace = RpcaTrace::default();
    let norm_a = a.norm();
    if norm_a == 0.0 {
        return Ok((trivial(a, Method::Iealm), trace));
    }
    let (m, n) = a.shape();
    let lambda = config.resolved_lambda(m, n);

    let norm_two = svd(a)?.s[0];
    let norm_inf = a.amax() / lambda;
    let mut y = a / norm_two.max(norm_inf);
    let mut b = DenseMatrix::zeros(m, n);
    let mut f = DenseMatrix::zeros(m, n);
    let mut mu = config.mu / norm_two;
    let mut svd_count = 1;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        trace.penalties.push(mu);
        let inv_mu = 1.0 / mu;
        f = soft_threshold(&(a - &b + &y * inv_mu), lambda * inv_mu);
        let g = a - &f + &y * inv_mu;
        b = svd(&g)?.map_singular_values(|s| shrink(s, inv_mu));
        svd_count += 1;
        let z = a - &b - &f;
        y += &z * mu;
        mu *= config.rho;
        iterations += 1;

        let crit = z.norm() / norm_a;
        trace.criteria.push(crit);
        if crit < config.tol {
            converged = true;
            break;
        }
    }

    let residual = relative_residual(a, &b, &f);
    Ok((
        Decomposition {
            method: Method::Iealm,
            background: b,
            foreground: f,
            thresholded_foreground: None,
            iterations,
            converged,
            svd_count,
            residual,
        },
        trace,
    ))
}

pub fn solve_apg(a: &DenseMatrix, config: &RpcaConfig) -> Result<Decomposition> {
    solve_apg_traced(a, config).map(|(d, _)| d)
}

/// Accelerated proximal gradient with continuation on the relaxed problem
/// `min μ (||B||_* + λ ||F||_1) + ½ ||A - B - F||_F²`, decreasing `μ`
/// geometrically from `0.99 ||A||_2` to a floor of `APG_FLOOR ||A||_2`.
/// Momentum is reset whenever the proximal step opposes the last move.
pub fn solve_apg_traced(a: &DenseMatrix, config: &RpcaConfig) -> Result<(Decomposition, RpcaTrace)> {
    config.validate()?;
    ensure_finite(a)?;
    let mut trace = RpcaTrace::default();
    if a.norm() == 0.0 {
        return Ok((trivial(a, Method::Apg), trace));
    }
    let (m, n) = a.shape();
    let lambda = config.resolved_lambda(m, n);
    let norm_two = svd(a)?.s[0];
    let mut svd_count = 1;

    let mut mu = 0.99 * norm_two;
    let mu_floor = APG_FLOOR * norm_two;
    let tau = APG_LIPSCHITZ;

    let mut b = DenseMatrix::zeros(m, n);
    let mut b_prev = b.clone();
    let mut f = DenseMatrix::zeros(m, n);
    let mut f_prev = f.clone();
    let (mut t, mut t_prev) = (1.0f64, 1.0f64);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        trace.penalties.push(mu);
        let momentum = (t_prev - 1.0) / t;
        let yb = &b + (&b - &b_prev) * momentum;
        let yf = &f + (&f - &f_prev) * momentum;
        let grad = (&yb + &yf - a) / tau;

        let gb = &yb - &grad;
        let b_next = svd(&gb)?.map_singular_values(|s| shrink(s, mu / tau));
        svd_count += 1;
        let gf = &yf - &grad;
        let f_next = soft_threshold(&gf, lambda * mu / tau);

        // gradient-based momentum restart
        let restart = (&yb - &b_next).dot(&(&b_next - &b)) + (&yf - &f_next).dot(&(&f_next - &f)) > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let coupling = &b_next + &f_next - &yb - &yf;
        let sb = (&yb - &b_next) * tau + &coupling;
        let sf = (&yf - &f_next) * tau + &coupling;
        let scale = tau * 1f64.max((b_next.norm_squared() + f_next.norm_squared()).sqrt());
        let crit = (sb.norm_squared() + sf.norm_squared()).sqrt() / scale;

        b_prev = std::mem::replace(&mut b, b_next);
        f_prev = std::mem::replace(&mut f, f_next);
        t_prev = if restart { 1.0 } else { t };
        t = t_next;
        let at_floor = mu <= mu_floor;
        mu = (APG_DECAY * mu).max(mu_floor);
        iterations += 1;

        trace.criteria.push(crit);
        if at_floor && crit < config.tol {
            converged = true;
            break;
        }
    }

    let residual = relative_residual(a, &b, &f);
    Ok((
        Decomposition {
            method: Method::Apg,
            background: b,
            foreground: f,
            thresholded_foreground: None,
            iterations,
            converged,
            svd_count,
            residual,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_values() {
        let c = RpcaConfig::default();
        assert_eq!((c.mu, c.rho, c.tol, c.max_iter), (1.5, 1.25, 1e-7, 500));
        assert_eq!(c.resolved_lambda(5120, 600), 1.0 / 5120f64.sqrt());
        assert_eq!(c.resolved_lambda(30, 40), 1.0 / 40f64.sqrt());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = RpcaConfig::default();
        c.rho = 1.0;
        assert!(c.validate().is_err());
        let mut c = RpcaConfig::default();
        c.lambda = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_input_gives_zero_split() {
        let a = DenseMatrix::zeros(5, 4);
        for d in [
            solve_iealm(&a, &RpcaConfig::default()).unwrap(),
            solve_apg(&a, &RpcaConfig::default()).unwrap(),
        ] {
            assert_eq!(d.background, a);
            assert_eq!(d.foreground, a);
            assert!(d.converged);
        }
    }

    #[test]
    fn iealm_penalty_is_geometric() {
        let a = DenseMatrix::from_fn(8, 6, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let cfg = RpcaConfig {
            max_iter: 20,
            ..RpcaConfig::default()
        };
        let (_, trace) = solve_iealm_traced(&a, &cfg).unwrap();
        let norm_two = svd(&a).unwrap().s[0];
        assert!((trace.penalties[0] - cfg.mu / norm_two).abs() <= 1e-12 * trace.penalties[0]);
        for (t, &mu) in trace.penalties.iter().enumerate() {
            let want = trace.penalties[0] * cfg.rho.powi(t as i32);
            assert!((mu - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn nonfinite_input_rejected() {
        let mut a = DenseMatrix::zeros(3, 3);
        a[(1, 1)] = f64::INFINITY;
        assert!(solve_iealm(&a, &RpcaConfig::default()).is_err());
        assert!(solve_apg(&a, &RpcaConfig::default()).is_err());
    }
}
