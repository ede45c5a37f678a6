use super::matrix::{dot, norm2};
use super::qr::householder_qr;
use super::{DenseMatrix, LinalgError};

/// Upper bound on Jacobi sweeps before the SVD reports non-convergence.
pub const MAX_JACOBI_SWEEPS: usize = 80;

/// Economy SVD `A = U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdResult {
    /// `U diag(σ) Vᵀ`, optionally keeping only the leading `k` triplets.
    pub fn reconstruct(&self, k: Option<usize>) -> DenseMatrix {
        let k = k.unwrap_or(self.singular_values.len()).min(self.singular_values.len());
        let mut us = self.u.leading_columns(k);
        for (j, &s) in self.singular_values[..k].iter().enumerate() {
            us.column_mut(j).iter_mut().for_each(|v| *v *= s);
        }
        us.matmul(&self.v.leading_columns(k).transpose()).expect("conformant factors")
    }
}

/// Economy-size SVD.
///
/// Tall inputs are first reduced by Householder QR; one-sided (Hestenes)
/// Jacobi rotations then orthogonalise the columns of the small triangular
/// factor. Wide inputs are handled through the transpose.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(LinalgError::Empty);
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    if rows < cols {
        let t = svd_tall(&a.transpose())?;
        return Ok(SvdResult { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    svd_tall(a)
}

fn svd_tall(a: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    let n = a.cols();
    let qr = householder_qr(a)?;
    let (w, v) = jacobi(qr.r().clone())?;

    let norms: Vec<f64> = (0..n).map(|j| norm2(w.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let sigma_max = norms[order[0]];
    let negligible = sigma_max * (n as f64) * f64::EPSILON;
    let mut ur = DenseMatrix::zeros(n, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut filled = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        singular_values.push(s);
        vs.column_mut(dst).copy_from_slice(v.column(src));
        if s > negligible && s > 0.0 {
            for (o, &x) in ur.column_mut(dst).iter_mut().zip(w.column(src)) {
                *o = x / s;
            }
            filled.push(true);
        } else {
            filled.push(false);
        }
    }
    complete_orthonormal(&mut ur, &filled);
    let u = qr.apply_q(&ur)?;
    Ok(SvdResult { u, singular_values, v: vs })
}

/// One-sided Jacobi on a square matrix: returns `(W, V)` with `W = A V` and
/// mutually orthogonal columns of `W`.
fn jacobi(mut w: DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
    let n = w.cols();
    let m = w.rows();
    let mut v = DenseMatrix::identity(n);
    if n == 1 {
        return Ok((w, v));
    }
    let tol = f64::EPSILON * (m as f64).sqrt();
    let mut sq: Vec<f64> = (0..n).map(|j| dot(w.column(j), w.column(j))).collect();
    for sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = sq[i];
                let beta = sq[j];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(w.column(i), w.column(j));
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w.as_mut_slice(), m, i, j, c, s);
                rotate_columns(v.as_mut_slice(), n, i, j, c, s);
                sq[i] = dot(w.column(i), w.column(i));
                sq[j] = dot(w.column(j), w.column(j));
            }
        }
        if !rotated {
            return Ok((w, v));
        }
        if sweep + 1 == MAX_JACOBI_SWEEPS {
            break;
        }
    }
    Err(LinalgError::NoConvergence { sweeps: MAX_JACOBI_SWEEPS })
}

#[inline]
fn rotate_columns(data: &mut [f64], rows: usize, i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = data.split_at_mut(j * rows);
    let ci = &mut lo[i * rows..(i + 1) * rows];
    let cj = &mut hi[..rows];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Replaces the unfilled columns of a square matrix with unit vectors
/// orthogonal to every other column.
fn complete_orthonormal(u: &mut DenseMatrix, filled: &[bool]) {
    let n = u.rows();
    let mut basis: Vec<Vec<f64>> = (0..u.cols()).filter(|&j| filled[j]).map(|j| u.column(j).to_vec()).collect();
    let mut candidate = 0;
    for j in (0..u.cols()).filter(|&j| !filled[j]) {
        loop {
            assert!(candidate < n, "orthonormal completion exhausted canonical vectors");
            let mut e = vec![0.0; n];
            e[candidate] = 1.0;
            candidate += 1;
            // twice is enough (Kahan-Parlett)
            for _ in 0..2 {
                for b in &basis {
                    let d = dot(b, &e);
                    e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                e.iter_mut().for_each(|x| *x /= nrm);
                u.column_mut(j).copy_from_slice(&e);
                basis.push(e);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(q: &DenseMatrix) -> f64 {
        q.tr_matmul(q).unwrap().sub(&DenseMatrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let res = svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(res.singular_values, vec![1.0, 1.0, 1.0]);
        let uvt = res.u.matmul(&res.v.transpose()).unwrap();
        assert!(uvt.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_is_sorted() {
        let res = svd(&DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        for (got, want) in res.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_and_rank_deficient_inputs_keep_orthonormal_factors() {
        let z = svd(&DenseMatrix::zeros(5, 3)).unwrap();
        assert_eq!(z.singular_values, vec![0.0; 3]);
        assert!(orthonormality_error(&z.u) < 1e-14);
        assert!(orthonormality_error(&z.v) < 1e-14);

        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]])
            .unwrap();
        let res = svd(&a).unwrap();
        assert!(res.singular_values[1] < 1e-14);
        assert!(orthonormality_error(&res.u) < 1e-12);
        assert!(res.reconstruct(None).sub(&a).unwrap().frobenius_norm() < 1e-13);
    }

    #[test]
    fn wide_input_goes_through_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 3.0, 0.0, 1.0]]).unwrap();
        let res = svd(&a).unwrap();
        assert_eq!(res.u.shape(), (2, 2));
        assert_eq!(res.v.shape(), (4, 2));
        assert!(res.reconstruct(None).sub(&a).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn empty_is_rejected() {
        assert_eq!(svd(&DenseMatrix::zeros(0, 3)).unwrap_err(), LinalgError::Empty);
    }
}
