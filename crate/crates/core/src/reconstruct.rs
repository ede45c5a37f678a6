//! Gappy least-squares reconstruction and tolerance-based accuracy metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::FeatureBasis;
use crate::linalg::{least_squares_minnorm, LinalgError};
use crate::sensors::{validate_indices, SensorError};

/// Default gap tolerance, inches.
pub const DEFAULT_TOLERANCE_INCHES: f64 = 0.005;

#[derive(Debug, Error, Clone)]
pub enum ReconstructError {
    #[error("{indices} indices but {values} values")]
    LengthMismatch { indices: usize, values: usize },
    #[error("non-finite measurement value at position {0}")]
    NonFinite(usize),
    #[error("vectors differ in length: {0} vs {1}")]
    VectorLength(usize, usize),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Gap values (inches) observed at a set of locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Measurement {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self, ReconstructError> {
        if indices.len() != values.len() {
            return Err(ReconstructError::LengthMismatch { indices: indices.len(), values: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(ReconstructError::NonFinite(pos));
        }
        Ok(Self { indices, values })
    }

    /// Samples a full gap vector at `indices`.
    pub fn sample(x: &[f64], indices: &[usize]) -> Self {
        Self { indices: indices.to_vec(), values: indices.iter().map(|&i| x[i]).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimate {
    pub coefficients: Vec<f64>,
    /// Fewer measurements than basis modes.
    pub underdetermined: bool,
    /// `CΦᵣ` lost rank; the minimum-norm solution was returned.
    pub rank_deficient: bool,
    pub min_singular_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub underdetermined: bool,
    pub rank_deficient: bool,
}

/// `â = (CΦᵣ)⁺ y`.
pub fn estimate_coefficients(basis: &FeatureBasis, meas: &Measurement) -> Result<CoefficientEstimate, ReconstructError> {
    if meas.indices.len() != meas.values.len() {
        return Err(ReconstructError::LengthMismatch { indices: meas.indices.len(), values: meas.values.len() });
    }
    validate_indices(&meas.indices, basis.location_count())?;
    let r = basis.rank_r;
    let p = meas.indices.len();
    if p == 0 {
        return Ok(CoefficientEstimate {
            coefficients: vec![0.0; r],
            underdetermined: true,
            rank_deficient: true,
            min_singular_value: 0.0,
        });
    }
    let theta = basis.phi_r.select_rows(&meas.indices);
    let y: Vec<f64> = match &basis.mean {
        Some(mean) => meas.indices.iter().zip(&meas.values).map(|(&i, v)| v - mean[i]).collect(),
        None => meas.values.clone(),
    };
    let sol = least_squares_minnorm(&theta, &y)?;
    let underdetermined = p < r;
    let rank_deficient = sol.rank < r;
    if underdetermined {
        log::warn!("{p} measurements for {r} basis modes; returning the minimum-norm coefficients");
    } else if rank_deficient {
        log::warn!(
            "sampled basis is rank deficient (smallest singular value {:.3e}); returning the minimum-norm coefficients",
            sol.min_singular_value
        );
    }
    Ok(CoefficientEstimate {
        coefficients: sol.x,
        underdetermined,
        rank_deficient,
        min_singular_value: sol.min_singular_value,
    })
}

/// `x̂ = Φᵣ â` (plus the stored mean for centred bases).
pub fn predict_full(basis: &FeatureBasis, meas: &Measurement) -> Result<Prediction, ReconstructError> {
    let est = estimate_coefficients(basis, meas)?;
    let mut x_hat = basis.phi_r.matvec(&est.coefficients)?;
    if let Some(mean) = &basis.mean {
        x_hat.iter_mut().zip(mean).for_each(|(x, m)| *x += m);
    }
    Ok(Prediction {
        x_hat,
        a_hat: est.coefficients,
        underdetermined: est.underdetermined,
        rank_deficient: est.rank_deficient,
    })
}

/// Fraction of locations with `|xᵢ − x̂ᵢ| < tol` (strict).
pub fn accuracy_within_tolerance(x_true: &[f64], x_hat: &[f64], tol: f64) -> Result<f64, ReconstructError> {
    if x_true.len() != x_hat.len() {
        return Err(ReconstructError::VectorLength(x_true.len(), x_hat.len()));
    }
    assert!(tol > 0.0, "tolerance must be positive");
    if x_true.is_empty() {
        return Ok(1.0);
    }
    let hits = x_true.iter().zip(x_hat).filter(|(a, b)| (*a - *b).abs() < tol).count();
    Ok(hits as f64 / x_true.len() as f64)
}

/// Histogram bins: `[0, e₀), [e₀, e₁), …, [e_{k−1}, e_k), [e_k, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    pub edges: Vec<f64>,
}

impl HistogramBins {
    /// `per_decade` log-spaced edges from `10^lo_exp` to `10^hi_exp`.
    pub fn logarithmic(lo_exp: i32, hi_exp: i32, per_decade: usize) -> Self {
        assert!(hi_exp > lo_exp && per_decade > 0);
        let steps = (hi_exp - lo_exp) as usize * per_decade;
        let edges = (0..=steps)
            .map(|k| 10f64.powf(lo_exp as f64 + k as f64 / per_decade as f64))
            .collect();
        Self { edges }
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin_of(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }

    /// `(lower, upper)` bounds of bin `k`.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.edges[k - 1] };
        let hi = self.edges.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    pub fn counts(&self, values: &[f64]) -> Vec<u64> {
        let mut counts = vec![0; self.bin_count()];
        for &v in values {
            counts[self.bin_of(v)] += 1;
        }
        counts
    }
}

impl Default for HistogramBins {
    /// Four bins per decade over `[1e-6, 1)` inches.
    fn default() -> Self {
        Self::logarithmic(-6, 0, 4)
    }
}

/// Probabilities reported by [`error_statistics`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStatistics {
    pub abs_errors: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    /// `(level, value)` pairs at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Vec<u64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantiles of `values` at `levels`.
pub fn quantiles(values: &[f64], levels: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    levels.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect()
}

pub fn error_statistics(x_true: &[f64], x_hat: &[f64], bins: &HistogramBins) -> Result<ErrorStatistics, ReconstructError> {
    if x_true.len() != x_hat.len() {
        return Err(ReconstructError::VectorLength(x_true.len(), x_hat.len()));
    }
    let abs_errors: Vec<f64> = x_true.iter().zip(x_hat).map(|(a, b)| (a - b).abs()).collect();
    Ok(summarize_errors(abs_errors, bins))
}

/// Summary statistics of precomputed absolute errors.
pub fn summarize_errors(abs_errors: Vec<f64>, bins: &HistogramBins) -> ErrorStatistics {
    if abs_errors.is_empty() {
        return ErrorStatistics {
            abs_errors,
            median: f64::NAN,
            mean: f64::NAN,
            quantiles: Vec::new(),
            histogram: vec![0; bins.bin_count()],
        };
    }
    let mut sorted = abs_errors.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = QUANTILE_LEVELS.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect();
    let mean = abs_errors.iter().sum::<f64>() / abs_errors.len() as f64;
    ErrorStatistics {
        median: quantile_sorted(&sorted, 0.5),
        mean,
        quantiles,
        histogram: bins.counts(&abs_errors),
        abs_errors,
    }
}
