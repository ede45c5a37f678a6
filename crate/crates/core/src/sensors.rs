//! Point-sensor selection.
//!
//! Exact mode takes the first `r` column pivots of `Φᵣᵀ`. Oversampled mode
//! keeps those `r` pivots and then extends the list greedily, each step adding
//! the row that most increases `log det ΘᵀΘ` (`Θ = CΦᵣ`). Both produce a
//! hierarchical list: a larger `p` only appends to a smaller one.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::FeatureBasis;
use crate::linalg::{dot, pivoted_qr, pseudo_inverse_cutoff, svd, DenseMatrix, LinalgError, PIVOT_TIE_RELATIVE};

#[derive(Debug, Error, Clone)]
pub enum SensorError {
    #[error("basis rows span fewer than {requested} directions; only {} pivots found", partial.indices.len())]
    RankDeficient { requested: usize, partial: SensorSet },
    #[error("oversampled selection needs rank < p <= n, got p = {p}, rank = {rank}, n = {n}")]
    InvalidOversample { p: usize, rank: usize, n: usize },
    #[error("cannot draw {p} distinct sensors from {n} locations")]
    TooMany { p: usize, n: usize },
    #[error("sensor index {index} out of range for {n} locations")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sensor index {0} appears more than once")]
    Duplicate(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Exact,
    Oversampled,
    Random,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Exact => "exact",
            SelectionMode::Oversampled => "oversampled",
            SelectionMode::Random => "random",
        }
    }
}

/// Ordered, distinct measurement locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSet {
    pub indices: Vec<usize>,
    pub mode: SelectionMode,
    /// `log det ΘᵀΘ` at selection time, when a basis was involved.
    pub objective_logdet: Option<f64>,
}

impl SensorSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks range and distinctness against `n` locations.
    pub fn validate(&self, n: usize) -> Result<(), SensorError> {
        validate_indices(&self.indices, n)
    }
}

pub(crate) fn validate_indices(indices: &[usize], n: usize) -> Result<(), SensorError> {
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(SensorError::IndexOutOfRange { index: i, n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(SensorError::Duplicate(i));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// `log det ΘᵀΘ`
    D,
    /// `λ_min(ΘᵀΘ)`
    E,
    /// `trace (ΘᵀΘ)⁻¹`
    A,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub criterion: Criterion,
    pub value: f64,
    /// Eigenvalues of `ΘᵀΘ`, descending (length `r`).
    pub eigenvalues: Vec<f64>,
    pub singular: bool,
}

/// `Θ = CΦᵣ`: the basis rows at `indices`.
pub fn measurement_rows(basis: &FeatureBasis, indices: &[usize]) -> DenseMatrix {
    basis.phi_r.select_rows(indices)
}

/// Evaluates a D/E/A criterion (noise variance fixed to one).
///
/// Eigenvalues come from the singular values of `Θ`, so `det ΘᵀΘ = ∏ σᵢ²`.
/// A singular `ΘᵀΘ` reports `D = −∞`, `E = 0`, `A = +∞`.
pub fn evaluate_objective(
    basis: &FeatureBasis,
    indices: &[usize],
    criterion: Criterion,
) -> Result<ObjectiveReport, SensorError> {
    validate_indices(indices, basis.location_count())?;
    let r = basis.rank_r;
    let mut eigenvalues = vec![0.0; r];
    if !indices.is_empty() {
        let theta = measurement_rows(basis, indices);
        let sv = svd(&theta)?.singular_values;
        for (e, s) in eigenvalues.iter_mut().zip(&sv) {
            *e = s * s;
        }
    }
    let sigma_max = eigenvalues.first().map_or(0.0, |e| e.sqrt());
    let cutoff = pseudo_inverse_cutoff(indices.len(), r, sigma_max);
    let singular = eigenvalues.iter().any(|&e| e.sqrt() < cutoff);
    let value = match (criterion, singular) {
        (Criterion::D, true) => f64::NEG_INFINITY,
        (Criterion::E, true) => 0.0,
        (Criterion::A, true) => f64::INFINITY,
        (Criterion::D, false) => eigenvalues.iter().map(|e| e.ln()).sum(),
        (Criterion::E, false) => eigenvalues.last().copied().unwrap_or(0.0),
        (Criterion::A, false) => eigenvalues.iter().map(|e| 1.0 / e).sum(),
    };
    Ok(ObjectiveReport { criterion, value, eigenvalues, singular })
}

fn logdet(basis: &FeatureBasis, indices: &[usize]) -> Result<f64, SensorError> {
    Ok(evaluate_objective(basis, indices, Criterion::D)?.value)
}

/// `r` sensors from the column pivots of `Φᵣᵀ`.
pub fn select_exact(basis: &FeatureBasis) -> Result<SensorSet, SensorError> {
    select_pivots(basis, basis.rank_r)
}

/// The first `count` column pivots of `Φᵣᵀ` (`count ≤ r`). Fewer than `r`
/// leaves the coefficient problem underdetermined.
pub fn select_pivots(basis: &FeatureBasis, count: usize) -> Result<SensorSet, SensorError> {
    let qr = pivoted_qr(&basis.phi_r.transpose(), count)?;
    let mut set = SensorSet { indices: qr.pivots, mode: SelectionMode::Exact, objective_logdet: None };
    if qr.rank_deficient {
        return Err(SensorError::RankDeficient { requested: count, partial: set });
    }
    if count == basis.rank_r {
        set.objective_logdet = Some(logdet(basis, &set.indices)?);
    }
    Ok(set)
}

/// `p > r` sensors: the exact pivots extended by greedy log-det ascent.
///
/// With `M = ΘᵀΘ`, appending row `φ` multiplies `det M` by `1 + φ M⁻¹ φᵀ`,
/// so each step picks the unselected row of largest leverage `φ M⁻¹ φᵀ`
/// (lowest index on ties). `M⁻¹` and all leverages are updated by
/// Sherman-Morrison in `O(n r)` per step.
pub fn select_oversampled(basis: &FeatureBasis, p: usize) -> Result<SensorSet, SensorError> {
    let n = basis.location_count();
    let r = basis.rank_r;
    if p <= r || p > n {
        return Err(SensorError::InvalidOversample { p, rank: r, n });
    }
    let exact = select_exact(basis)?;
    let phi = &basis.phi_r;
    let mut indices = exact.indices;
    let mut selected = vec![false; n];
    for &i in &indices {
        selected[i] = true;
    }

    let theta = phi.select_rows(&indices);
    let gram = theta.tr_matmul(&theta)?;
    let mut m_inv = invert_spd(&gram)?;

    let rows: Vec<Vec<f64>> = (0..n).map(|i| phi.row(i)).collect();
    let mut leverage: Vec<f64> = rows.iter().map(|row| quad_form(&m_inv, row)).collect();
    let mut proj = vec![0.0; n];

    while indices.len() < p {
        let best = (0..n)
            .filter(|&j| !selected[j])
            .map(|j| leverage[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let cut = best - PIVOT_TIE_RELATIVE * best.abs();
        let pick = (0..n).find(|&j| !selected[j] && leverage[j] >= cut).expect("an unselected row remains");
        selected[pick] = true;
        indices.push(pick);

        // w = M⁻¹ φ_pick; M⁻¹ ← M⁻¹ − w wᵀ / (1 + φ_pick · w)
        let w = m_inv.matvec(&rows[pick])?;
        let denom = 1.0 + dot(&rows[pick], &w);
        for (j, row) in rows.iter().enumerate() {
            proj[j] = dot(row, &w);
        }
        for (lev, pj) in leverage.iter_mut().zip(&proj) {
            *lev -= pj * pj / denom;
        }
        for b in 0..r {
            for a in 0..r {
                m_inv[(a, b)] -= w[a] * w[b] / denom;
            }
        }
    }

    let objective_logdet = Some(logdet(basis, &indices)?);
    Ok(SensorSet { indices, mode: SelectionMode::Oversampled, objective_logdet })
}

fn quad_form(m: &DenseMatrix, x: &[f64]) -> f64 {
    let mx = m.matvec(x).expect("square r×r against length-r row");
    dot(x, &mx)
}

/// Inverse of a symmetric positive definite matrix via its SVD.
fn invert_spd(m: &DenseMatrix) -> Result<DenseMatrix, SensorError> {
    let dec = svd(m)?;
    let r = m.rows();
    let smax = dec.singular_values[0];
    if dec.singular_values.iter().any(|&s| s < pseudo_inverse_cutoff(r, r, smax)) {
        return Err(LinalgError::InvalidArgument("ΘᵀΘ is singular".into()).into());
    }
    let mut vs = dec.v.clone();
    for (k, &s) in dec.singular_values.iter().enumerate() {
        vs.column_mut(k).iter_mut().for_each(|v| *v /= s);
    }
    Ok(vs.matmul(&dec.u.transpose())?)
}

/// `p` distinct locations drawn uniformly from `0..n` with a ChaCha8 stream.
pub fn select_random(n: usize, p: usize, seed: u64) -> Result<SensorSet, SensorError> {
    if p > n {
        return Err(SensorError::TooMany { p, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SensorSet {
        indices: index::sample(&mut rng, n, p).into_vec(),
        mode: SelectionMode::Random,
        objective_logdet: None,
    })
}
