//! Feature basis extraction: training matrix assembly, RPCA, and SVD
//! truncation at the optimal hard threshold for unknown noise level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{svd, DenseMatrix, LinalgError};
use crate::rpca::{rpca, RpcaConfig, RpcaError};

#[derive(Debug, Error, Clone)]
pub enum BasisError {
    #[error("unit {unit:?} has {len} gap values, expected {expected}")]
    LengthMismatch { unit: String, len: usize, expected: usize },
    #[error("training set needs at least {need} units, got {got}")]
    TooFewUnits { need: usize, got: usize },
    #[error("training set has no measurement locations")]
    Empty,
    #[error("{count} unit ids supplied for {cols} columns")]
    IdCount { count: usize, cols: usize },
    #[error("non-finite gap value for unit {unit:?} at location {location}")]
    NonFinite { unit: String, location: usize },
    #[error("RPCA stopped after {iterations} iterations at residual {residual:.3e} without converging")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Basis built from the unconverged decomposition, for callers that
        /// choose to proceed anyway.
        partial: Box<FeatureBasis>,
    },
    #[error(transparent)]
    Rpca(#[from] RpcaError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One unit's flattened gap measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct GapVector {
    pub id: String,
    pub gaps: Vec<f64>,
}

/// `n` locations × `m` units, inches.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: DenseMatrix,
    pub unit_ids: Vec<String>,
}

impl TrainingSet {
    /// Wraps a matrix; ids default to `unit-<column>`.
    pub fn from_matrix(x: DenseMatrix, unit_ids: Option<Vec<String>>) -> Result<Self, BasisError> {
        let unit_ids = unit_ids.unwrap_or_else(|| (0..x.cols()).map(|j| format!("unit-{j}")).collect());
        if unit_ids.len() != x.cols() {
            return Err(BasisError::IdCount { count: unit_ids.len(), cols: x.cols() });
        }
        let set = Self { x, unit_ids };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        if self.x.rows() == 0 {
            return Err(BasisError::Empty);
        }
        if self.x.cols() < 2 {
            return Err(BasisError::TooFewUnits { need: 2, got: self.x.cols() });
        }
        if self.x.rows() < self.x.cols() {
            log::warn!(
                "training set has fewer locations ({}) than units ({})",
                self.x.rows(),
                self.x.cols()
            );
        }
        Ok(())
    }

    pub fn location_count(&self) -> usize {
        self.x.rows()
    }

    pub fn unit_count(&self) -> usize {
        self.x.cols()
    }

    /// The set without column `held_out`.
    pub fn without_unit(&self, held_out: usize) -> TrainingSet {
        let keep: Vec<usize> = (0..self.unit_count()).filter(|&j| j != held_out).collect();
        TrainingSet {
            x: self.x.select_columns(&keep),
            unit_ids: keep.iter().map(|&j| self.unit_ids[j].clone()).collect(),
        }
    }

    /// The set restricted to the given locations.
    pub fn rows_subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet { x: self.x.select_rows(rows), unit_ids: self.unit_ids.clone() }
    }
}

/// Stacks unit gap vectors as columns, in the given order.
pub fn build_matrix(units: &[GapVector]) -> Result<TrainingSet, BasisError> {
    let Some(first) = units.first() else {
        return Err(BasisError::TooFewUnits { need: 2, got: 0 });
    };
    let n = first.gaps.len();
    if n == 0 {
        return Err(BasisError::Empty);
    }
    for u in units {
        if u.gaps.len() != n {
            return Err(BasisError::LengthMismatch { unit: u.id.clone(), len: u.gaps.len(), expected: n });
        }
        if let Some(location) = u.gaps.iter().position(|v| !v.is_finite()) {
            return Err(BasisError::NonFinite { unit: u.id.clone(), location });
        }
    }
    let columns: Vec<Vec<f64>> = units.iter().map(|u| u.gaps.clone()).collect();
    let x = DenseMatrix::from_columns(&columns)?;
    TrainingSet::from_matrix(x, Some(units.iter().map(|u| u.id.clone()).collect()))
}

/// Optimal hard-threshold coefficient for an unknown noise level,
/// `ω(β) ≈ 0.56β³ − 0.95β² + 1.82β + 1.43` with aspect ratio `β ≤ 1`.
pub fn omega(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

/// Median with the two-middle average for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSelection {
    pub rank: usize,
    /// `τ* = ω(β) · σ_median`.
    pub threshold: f64,
    /// All singular values were zero; the rank was floored to one.
    pub degenerate: bool,
}

/// Counts singular values strictly above `ω(β)·median(σ)`, floored at one.
pub fn optimal_rank(singular_values: &[f64], n: usize, m: usize) -> RankSelection {
    assert!(n >= 1 && m >= 1, "dimensions must be positive");
    if singular_values.is_empty() || singular_values.iter().all(|&s| s == 0.0) {
        return RankSelection { rank: 1, threshold: 0.0, degenerate: true };
    }
    let (short, long) = if n >= m { (m, n) } else { (n, m) };
    let beta = short as f64 / long as f64;
    let threshold = omega(beta) * median(singular_values);
    let count = singular_values.iter().filter(|&&s| s > threshold).count();
    RankSelection { rank: count.max(1), threshold, degenerate: false }
}

/// Convergence summary of the RPCA run behind a basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpcaDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    /// `n × r` with orthonormal columns.
    pub phi_r: DenseMatrix,
    /// Every singular value of `L`, descending.
    pub singular_values: Vec<f64>,
    pub rank_r: usize,
    pub truncation_threshold: f64,
    pub degenerate: bool,
    /// Row means subtracted before RPCA, when centring was requested.
    pub mean: Option<Vec<f64>>,
    pub rpca: RpcaDiagnostics,
}

impl FeatureBasis {
    /// Basis with no training history, e.g. loaded from disk or built in tests.
    pub fn from_phi(phi_r: DenseMatrix) -> Self {
        let r = phi_r.cols();
        Self {
            phi_r,
            singular_values: vec![1.0; r],
            rank_r: r,
            truncation_threshold: 0.0,
            degenerate: false,
            mean: None,
            rpca: RpcaDiagnostics { iterations: 0, converged: true, final_residual: 0.0, lambda: 0.0, mu: 0.0 },
        }
    }

    pub fn location_count(&self) -> usize {
        self.phi_r.rows()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisOptions {
    /// Subtract the per-location mean before RPCA (off by default).
    pub center: bool,
}

fn row_means(x: &DenseMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.rows()];
    for j in 0..x.cols() {
        crate::linalg::axpy(1.0 / x.cols() as f64, x.column(j), &mut mean);
    }
    mean
}

/// RPCA on the training matrix, SVD of the low-rank part, then truncation.
///
/// An unconverged RPCA yields [`BasisError::NotConverged`] carrying the basis
/// computed from the partial decomposition.
pub fn extract_basis(
    training: &TrainingSet,
    rpca_config: &RpcaConfig,
    options: &BasisOptions,
) -> Result<FeatureBasis, BasisError> {
    training.validate()?;
    let (n, m) = training.x.shape();
    let (input, mean) = if options.center {
        let mean = row_means(&training.x);
        let centered = DenseMatrix::from_fn(n, m, |i, j| training.x[(i, j)] - mean[i]);
        (centered, Some(mean))
    } else {
        (training.x.clone(), None)
    };

    let dec = rpca(&input, rpca_config)?;
    let factors = svd(&dec.low_rank)?;
    let selection = optimal_rank(&factors.singular_values, n, m);
    let rank_r = selection.rank.min(factors.singular_values.len());
    let basis = FeatureBasis {
        phi_r: factors.u.leading_columns(rank_r),
        singular_values: factors.singular_values,
        rank_r,
        truncation_threshold: selection.threshold,
        degenerate: selection.degenerate,
        mean,
        rpca: RpcaDiagnostics {
            iterations: dec.iterations,
            converged: dec.converged,
            final_residual: dec.final_residual(),
            lambda: dec.lambda,
            mu: dec.mu,
        },
    };
    if !dec.converged {
        return Err(BasisError::NotConverged {
            iterations: dec.iterations,
            residual: dec.final_residual(),
            partial: Box::new(basis),
        });
    }
    Ok(basis)
}

/// Like [`extract_basis`] but accepts an unconverged decomposition; the
/// returned diagnostics say whether it converged.
pub fn extract_basis_lenient(
    training: &TrainingSet,
    rpca_config: &RpcaConfig,
    options: &BasisOptions,
) -> Result<FeatureBasis, BasisError> {
    match extract_basis(training, rpca_config, options) {
        Err(BasisError::NotConverged { partial, .. }) => Ok(*partial),
        other => other,
    }
}
