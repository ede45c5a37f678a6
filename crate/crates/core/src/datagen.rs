//! Synthetic low-rank-plus-sparse gap data with retained ground truth.
//!
//! All draws come from a ChaCha8 stream seeded with `SynthSpec::seed`, in a
//! fixed order: basis entries (column-major), coefficients (column-major),
//! outlier positions, outlier signs, then noise (column-major). Gaussian
//! draws use `rand_distr::StandardNormal`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{householder_qr, DenseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Measurement locations (rows).
    pub n: usize,
    /// Units (columns).
    pub m: usize,
    pub r_true: usize,
    /// Coefficient scale in inches; mode `i` (1-based) is scaled by `1/i`.
    pub coeff_scale: f64,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub outlier_magnitude: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 || self.m == 0 {
            return Err(SynthError::InvalidSpec("n and m must be positive".into()));
        }
        if self.r_true == 0 || self.r_true > self.n.min(self.m) {
            return Err(SynthError::InvalidSpec(format!(
                "r_true must lie in [1, min(n, m)] = [1, {}], got {}",
                self.n.min(self.m),
                self.r_true
            )));
        }
        for (name, v) in [
            ("coeff_scale", self.coeff_scale),
            ("outlier_magnitude", self.outlier_magnitude),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidSpec(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(SynthError::InvalidSpec(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }

    /// Expected RMS entry of the low-rank part, `coeff_scale · √(Σ 1/i² / n)`.
    pub fn signal_rms(&self) -> f64 {
        let h2: f64 = (1..=self.r_true).map(|i| 1.0 / (i * i) as f64).sum();
        self.coeff_scale * (h2 / self.n as f64).sqrt()
    }

    /// Number of outlier entries placed: `round(fraction · n · m)`.
    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * (self.n * self.m) as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub x: DenseMatrix,
    pub l_true: DenseMatrix,
    pub s_true: DenseMatrix,
    /// `n × r_true`, orthonormal columns.
    pub phi_true: DenseMatrix,
    /// `r_true × m`.
    pub coeffs_true: DenseMatrix,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_column_major(rows, cols, data).expect("gaussian draws are finite")
}

fn orthonormal_basis(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DenseMatrix {
    householder_qr(&gaussian_matrix(rng, n, r)).expect("n >= r").q()
}

fn decaying_coefficients(rng: &mut ChaCha8Rng, r: usize, m: usize, scale: f64) -> DenseMatrix {
    let mut c = gaussian_matrix(rng, r, m);
    for j in 0..m {
        for (i, v) in c.column_mut(j).iter_mut().enumerate() {
            *v *= scale / (i + 1) as f64;
        }
    }
    c
}

fn corrupt(rng: &mut ChaCha8Rng, spec: &SynthSpec, l_true: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (n, m) = l_true.shape();
    let mut s_true = DenseMatrix::zeros(n, m);
    let count = spec.outlier_count();
    if count > 0 {
        let positions = index::sample(rng, n * m, count).into_vec();
        let data = s_true.as_mut_slice();
        for pos in positions {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            data[pos] = sign * spec.outlier_magnitude;
        }
    }
    let mut x = l_true.add(&s_true).expect("same shape");
    if spec.noise_sigma > 0.0 {
        for v in x.as_mut_slice() {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sigma * z;
        }
    }
    (x, s_true)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phi_true = orthonormal_basis(&mut rng, spec.n, spec.r_true);
    let coeffs_true = decaying_coefficients(&mut rng, spec.r_true, spec.m, spec.coeff_scale);
    let l_true = phi_true.matmul(&coeffs_true).expect("conformant");
    let (x, s_true) = corrupt(&mut rng, spec, &l_true);
    Ok(SynthData { x, l_true, s_true, phi_true, coeffs_true })
}

/// Data made of independent low-rank row blocks.
#[derive(Debug, Clone)]
pub struct BlockSynthData {
    pub data: SynthData,
    /// Block label (0-based) of every row.
    pub segment_labels: Vec<u32>,
}

/// Stacks `block_sizes.len()` independent rank-`r_true` blocks of rows.
///
/// `spec.n` is ignored in favour of `Σ block_sizes`; the ground-truth basis is
/// block diagonal with `r_true` columns per block.
pub fn generate_blocks(spec: &SynthSpec, block_sizes: &[usize]) -> Result<BlockSynthData, SynthError> {
    let n: usize = block_sizes.iter().sum();
    let spec = SynthSpec { n, ..spec.clone() };
    spec.validate()?;
    if let Some(&small) = block_sizes.iter().find(|&&b| b < spec.r_true) {
        return Err(SynthError::InvalidSpec(format!("block of {small} rows cannot hold rank {}", spec.r_true)));
    }
    let b = block_sizes.len();
    let r = spec.r_true;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut phi_true = DenseMatrix::zeros(n, b * r);
    let mut coeffs_true = DenseMatrix::zeros(b * r, spec.m);
    let mut segment_labels = Vec::with_capacity(n);
    let mut offset = 0;
    for (blk, &size) in block_sizes.iter().enumerate() {
        let phi = orthonormal_basis(&mut rng, size, r);
        let coeffs = decaying_coefficients(&mut rng, r, spec.m, spec.coeff_scale);
        for k in 0..r {
            phi_true.column_mut(blk * r + k)[offset..offset + size].copy_from_slice(phi.column(k));
            for j in 0..spec.m {
                coeffs_true[(blk * r + k, j)] = coeffs[(k, j)];
            }
        }
        segment_labels.extend(std::iter::repeat_n(blk as u32, size));
        offset += size;
    }
    let l_true = phi_true.matmul(&coeffs_true).expect("conformant");
    let (x, s_true) = corrupt(&mut rng, &spec, &l_true);
    Ok(BlockSynthData { data: SynthData { x, l_true, s_true, phi_true, coeffs_true }, segment_labels })
}
