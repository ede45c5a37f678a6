//! Robust PCA by principal component pursuit.
//!
//! Splits `X = L + S` into a low-rank `L` and a sparse `S` by minimising
//! `‖L‖_* + λ‖S‖₁` subject to `L + S = X`, using the inexact augmented
//! Lagrange multiplier iteration with alternating directions:
//!
//! ```text
//! L ← svt(X − S + Y/μ, 1/μ)
//! S ← shrink(X − L + Y/μ, λ/μ)
//! Y ← Y + μ(X − L − S)
//! ```
//!
//! The loop stops once `‖X − L − S‖_F / ‖X‖_F` drops to the tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{svd, DenseMatrix, LinalgError};
use crate::param::AutoOr;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpcaError {
    #[error("invalid RPCA configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RpcaConfig {
    /// Sparsity weight; `auto` resolves to `1/√max(n, m)`.
    pub lambda: AutoOr,
    /// Penalty; `auto` resolves to `nm / (4‖X‖₁)` and is held fixed.
    pub mu: AutoOr,
    /// Relative Frobenius feasibility residual at which the loop stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        Self { lambda: AutoOr::Auto, mu: AutoOr::Auto, tolerance: 1e-7, max_iterations: 500 }
    }
}

impl RpcaConfig {
    pub fn validate(&self) -> Result<(), RpcaError> {
        if let AutoOr::Value(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(RpcaError::InvalidConfig(format!("lambda must be positive, got {l}")));
            }
        }
        if let AutoOr::Value(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(RpcaError::InvalidConfig(format!("mu must be positive, got {mu}")));
            }
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(RpcaError::InvalidConfig(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(RpcaError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub low_rank: DenseMatrix,
    pub sparse: DenseMatrix,
    /// Lagrange multiplier at exit.
    pub multiplier: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Relative feasibility residual after each iteration.
    pub residual_history: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl RpcaResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Soft threshold `sign(x) · max(|x| − τ, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Singular value thresholding: `U diag(shrink(σ, τ)) Vᵀ`.
pub fn svt(x: &DenseMatrix, tau: f64) -> Result<DenseMatrix, LinalgError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(LinalgError::InvalidArgument(format!("threshold must be non-negative, got {tau}")));
    }
    let dec = svd(x)?;
    let kept = dec.singular_values.iter().take_while(|&&s| s > tau).count();
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for k in 0..kept {
        let s = dec.singular_values[k] - tau;
        let u = dec.u.column(k);
        for (j, &vj) in dec.v.column(k).iter().enumerate() {
            let w = s * vj;
            if w != 0.0 {
                crate::linalg::axpy(w, u, out.column_mut(j));
            }
        }
    }
    Ok(out)
}

/// `1/√max(n, m)`.
pub fn default_lambda(n: usize, m: usize) -> f64 {
    assert!(n >= 1 && m >= 1, "dimensions must be positive");
    1.0 / (n.max(m) as f64).sqrt()
}

/// `nm / (4‖X‖₁)`; `None` for the zero matrix.
pub fn default_mu(x: &DenseMatrix) -> Option<f64> {
    let l1 = x.l1_norm();
    (l1 > 0.0).then(|| (x.rows() * x.cols()) as f64 / (4.0 * l1))
}

pub fn rpca(x: &DenseMatrix, config: &RpcaConfig) -> Result<RpcaResult, RpcaError> {
    config.validate()?;
    let (n, m) = x.shape();
    if n == 0 || m == 0 {
        return Err(LinalgError::Empty.into());
    }
    if !x.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 }.into());
    }
    let lambda = config.lambda.resolve(|| default_lambda(n, m));
    let x_norm = x.frobenius_norm();
    let Some(auto_mu) = default_mu(x) else {
        let zero = DenseMatrix::zeros(n, m);
        return Ok(RpcaResult {
            low_rank: zero.clone(),
            sparse: zero.clone(),
            multiplier: zero,
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
            lambda,
            mu: f64::INFINITY,
        });
    };
    let mu = config.mu.resolve(|| auto_mu);
    let inv_mu = 1.0 / mu;
    let sparse_tau = lambda * inv_mu;

    let xs = x.as_slice();
    let mut low_rank = DenseMatrix::zeros(n, m);
    let mut sparse = DenseMatrix::zeros(n, m);
    let mut multiplier = DenseMatrix::zeros(n, m);
    let mut scratch = DenseMatrix::zeros(n, m);
    let mut residual_history = Vec::with_capacity(config.max_iterations.min(1024));
    let mut converged = false;

    for _ in 0..config.max_iterations {
        for (((o, &xv), &sv), &yv) in scratch
            .as_mut_slice()
            .iter_mut()
            .zip(xs)
            .zip(sparse.as_slice())
            .zip(multiplier.as_slice())
        {
            *o = xv - sv + inv_mu * yv;
        }
        low_rank = svt(&scratch, inv_mu)?;

        for (((s, &xv), &lv), &yv) in sparse
            .as_mut_slice()
            .iter_mut()
            .zip(xs)
            .zip(low_rank.as_slice())
            .zip(multiplier.as_slice())
        {
            *s = shrink(xv - lv + inv_mu * yv, sparse_tau);
        }

        let mut res_sq = 0.0;
        for (((y, &xv), &lv), &sv) in multiplier
            .as_mut_slice()
            .iter_mut()
            .zip(xs)
            .zip(low_rank.as_slice())
            .zip(sparse.as_slice())
        {
            let r = xv - lv - sv;
            res_sq += r * r;
            *y += mu * r;
        }
        let residual = res_sq.sqrt() / x_norm;
        residual_history.push(residual);
        if residual <= config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(RpcaResult {
        low_rank,
        sparse,
        multiplier,
        iterations: residual_history.len(),
        converged,
        residual_history,
        lambda,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink(0.0, 1.0), 0.0);
        assert_eq!(shrink(5.0, 2.0), 3.0);
        assert_eq!(shrink(-5.0, 2.0), -3.0);
        assert_eq!(shrink(1.5, 2.0), 0.0);
        assert_eq!(shrink(-1.5, 2.0), 0.0);
    }

    #[test]
    fn svt_examples() {
        let i3 = DenseMatrix::identity(3);
        assert!(svt(&i3, 0.0).unwrap().sub(&i3).unwrap().max_abs() < 1e-15);
        let d = DenseMatrix::from_diagonal(&[3.0, 1.0]);
        let out = svt(&d, 2.0).unwrap();
        assert!(out.sub(&DenseMatrix::from_diagonal(&[1.0, 0.0])).unwrap().max_abs() < 1e-15);
        assert!(svt(&d, -1.0).is_err());
    }

    #[test]
    fn lambda_examples() {
        assert!((default_lambda(10076, 53) - 1.0 / 10076f64.sqrt()).abs() < 1e-15);
        assert_eq!(default_lambda(1, 1), 1.0);
        assert!((default_lambda(4, 9) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_input_returns_immediately() {
        let res = rpca(&DenseMatrix::zeros(4, 3), &RpcaConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        assert_eq!(res.low_rank.max_abs(), 0.0);
        assert_eq!(res.sparse.max_abs(), 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = RpcaConfig { tolerance: 1.5, ..Default::default() };
        assert!(matches!(rpca(&DenseMatrix::identity(2), &bad), Err(RpcaError::InvalidConfig(_))));
        let bad = RpcaConfig { lambda: AutoOr::Value(-1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RpcaConfig { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn max_iterations_reports_unconverged() {
        let x = DenseMatrix::from_fn(12, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let cfg = RpcaConfig { max_iterations: 2, ..Default::default() };
        let res = rpca(&x, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert_eq!(res.residual_history.len(), 2);
    }
}
