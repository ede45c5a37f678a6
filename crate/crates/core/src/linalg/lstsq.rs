use super::svd::svd;
use super::{DenseMatrix, LinalgError};

/// Minimum-norm least-squares solution with the SVD diagnostics behind it.
#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    pub x: Vec<f64>,
    /// Number of singular values kept above the cutoff.
    pub rank: usize,
    /// Smallest singular value of `A` (including any that were cut).
    pub min_singular_value: f64,
    pub cutoff: f64,
}

/// Singular values below this are dropped from the pseudoinverse:
/// `max(rows, cols) · σ₁ · ε`, floored at `1e-12`.
pub fn pseudo_inverse_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    (rows.max(cols) as f64 * sigma_max * f64::EPSILON).max(1e-12)
}

/// `x = A⁺ b`, the minimiser of `‖Ax − b‖₂` with the smallest `‖x‖₂`.
pub fn least_squares_minnorm(a: &DenseMatrix, b: &[f64]) -> Result<LeastSquaresSolution, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::ShapeMismatch(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite { row: pos, col: 0 });
    }
    let dec = svd(a)?;
    let sigma_max = dec.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = pseudo_inverse_cutoff(a.rows(), a.cols(), sigma_max);
    let utb = dec.u.tr_matvec(b)?;
    let mut coeffs = vec![0.0; dec.singular_values.len()];
    let mut rank = 0;
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s >= cutoff {
            coeffs[k] = utb[k] / s;
            rank += 1;
        }
    }
    let x = dec.v.matvec(&coeffs)?;
    Ok(LeastSquaresSolution {
        x,
        rank,
        min_singular_value: dec.singular_values.last().copied().unwrap_or(0.0),
        cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let sol = least_squares_minnorm(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        for (got, want) in sol.x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(sol.rank, 3);
    }

    #[test]
    fn overdetermined_column_of_ones_gives_mean() {
        let a = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let sol = least_squares_minnorm(&a, &[1.0, 3.0]).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn underdetermined_picks_minimal_norm() {
        // x + y = 2 → (1, 1)
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let sol = least_squares_minnorm(&a, &[2.0]).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
        assert_eq!(sol.rank, 1);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let sol = least_squares_minnorm(&DenseMatrix::zeros(3, 2), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.rank, 0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            least_squares_minnorm(&DenseMatrix::identity(2), &[1.0]),
            Err(LinalgError::ShapeMismatch(_))
        ));
    }
}
