//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's factorizations.

#![allow(dead_code)]

use gapsense::linalg::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_column_major(rows, cols, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal columns by twice-iterated modified Gram-Schmidt.
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = (0..a.cols()).map(|j| a.column(j).to_vec()).collect();
    for j in 0..cols.len() {
        for _ in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let c = dot(&done[k], &rest[0]);
                for (v, q) in rest[0].iter_mut().zip(&done[k]) {
                    *v -= c * q;
                }
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    DenseMatrix::from_columns(&cols).unwrap()
}

pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DenseMatrix {
    orthonormalize(&gaussian(rng, n, r))
}

/// Greedy column selection: repeatedly take the column with the largest
/// residual after projecting out the columns already chosen (lowest index on
/// ties within the same relative tolerance as the library).
pub fn greedy_gram_schmidt_pivots(a: &DenseMatrix, p: usize) -> Vec<usize> {
    let mut residual: Vec<Vec<f64>> = (0..a.cols()).map(|j| a.column(j).to_vec()).collect();
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let norms: Vec<f64> = residual.iter().map(|c| dot(c, c).sqrt()).collect();
        let max = (0..norms.len()).filter(|j| !chosen.contains(j)).map(|j| norms[j]).fold(0.0, f64::max);
        let pick = (0..norms.len())
            .find(|&j| !chosen.contains(&j) && norms[j] >= max * (1.0 - 1e-12))
            .unwrap();
        let q: Vec<f64> = residual[pick].iter().map(|v| v / norms[pick]).collect();
        for (j, col) in residual.iter_mut().enumerate() {
            if j == pick || chosen.contains(&j) {
                continue;
            }
            let c = dot(&q, col);
            for (v, qi) in col.iter_mut().zip(&q) {
                *v -= c * qi;
            }
        }
        chosen.push(pick);
    }
    chosen
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn lu_determinant(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / dot(b, b).sqrt()
}

/// Checks `|r_ii|² ≥ Σ_{j=i}^{min(k, rows)} |r_jk|²` for every `i ≤ k`.
pub fn diagonally_dominant(r: &DenseMatrix) -> bool {
    let steps = r.rows().min(r.cols());
    for i in 0..steps {
        let rii = r[(i, i)] * r[(i, i)];
        for k in i..r.cols() {
            let tail: f64 = (i..r.rows().min(k + 1)).map(|j| r[(j, k)] * r[(j, k)]).sum();
            if rii < tail * (1.0 - 1e-12) - 1e-300 {
                return false;
            }
        }
    }
    true
}
