use super::matrix::{dot, norm2};
use super::{DenseMatrix, LinalgError};

/// Two residual norms within this relative distance count as tied; the lower
/// column index wins.
pub const PIVOT_TIE_RELATIVE: f64 = 1e-12;

/// Residual norms below this (times the largest initial column norm, when that
/// exceeds one) are treated as numerically zero.
const RANK_FLOOR: f64 = 1e-12;

/// A single Householder reflector `I - beta v vᵀ` acting on rows `offset..`.
#[derive(Debug, Clone)]
struct Reflector {
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    /// Builds the reflector mapping `x` onto `alpha e₁`; returns it with `alpha`.
    fn annihilating(offset: usize, x: &[f64]) -> (Self, f64) {
        let norm = norm2(x);
        if norm == 0.0 {
            return (Self { offset, v: vec![0.0; x.len()], beta: 0.0 }, 0.0);
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
        (Self { offset, v, beta }, alpha)
    }

    #[inline]
    fn apply(&self, col: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let tail = &mut col[self.offset..self.offset + self.v.len()];
        let s = self.beta * dot(&self.v, tail);
        if s != 0.0 {
            for (t, &vi) in tail.iter_mut().zip(&self.v) {
                *t -= s * vi;
            }
        }
    }
}

/// Accumulates `Q` (rows × k) from reflectors, applied in reverse order.
fn form_q(rows: usize, k: usize, reflectors: &[Reflector]) -> DenseMatrix {
    let mut q = DenseMatrix::zeros(rows, k);
    for j in 0..k {
        let col = q.column_mut(j);
        col[j] = 1.0;
        for h in reflectors.iter().rev() {
            h.apply(col);
        }
    }
    q
}

/// Unpivoted Householder QR of a matrix with `rows >= cols`.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    rows: usize,
    reflectors: Vec<Reflector>,
    r: DenseMatrix,
}

impl HouseholderQr {
    /// Upper-triangular factor, `cols × cols`.
    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    /// Thin orthonormal factor, `rows × cols`.
    pub fn q(&self) -> DenseMatrix {
        form_q(self.rows, self.reflectors.len(), &self.reflectors)
    }

    /// Computes `Q · m` for `m` with `cols` rows, without forming `Q`.
    pub fn apply_q(&self, m: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        let k = self.reflectors.len();
        if m.rows() != k {
            return Err(LinalgError::ShapeMismatch(format!(
                "Q is {}x{k}, operand has {} rows",
                self.rows,
                m.rows()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, m.cols());
        for j in 0..m.cols() {
            let col = out.column_mut(j);
            col[..k].copy_from_slice(m.column(j));
            for h in self.reflectors.iter().rev() {
                h.apply(col);
            }
        }
        Ok(out)
    }
}

pub fn householder_qr(a: &DenseMatrix) -> Result<HouseholderQr, LinalgError> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(LinalgError::ShapeMismatch(format!(
            "householder_qr needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let mut work = a.clone();
    let mut reflectors = Vec::with_capacity(cols);
    let mut r = DenseMatrix::zeros(cols, cols);
    for k in 0..cols {
        let (h, alpha) = Reflector::annihilating(k, &work.column(k)[k..]);
        for j in k + 1..cols {
            h.apply(work.column_mut(j));
        }
        for i in 0..k {
            r[(i, k)] = work[(i, k)];
        }
        r[(k, k)] = alpha;
        reflectors.push(h);
    }
    Ok(HouseholderQr { rows, reflectors, r })
}

/// Output of greedy column-pivoted QR.
#[derive(Debug, Clone)]
pub struct PivotedQrResult {
    /// Selected columns in selection order (0-based).
    pub pivots: Vec<usize>,
    /// Signed `r_ii` produced at each pivot step.
    pub r_diagonal: Vec<f64>,
    /// `k × cols` upper-trapezoidal factor whose columns follow
    /// [`PivotedQrResult::permutation`].
    pub r: DenseMatrix,
    /// Set when every remaining residual fell below the rank floor before
    /// the requested number of pivots was reached.
    pub rank_deficient: bool,
    rows: usize,
    reflectors: Vec<Reflector>,
}

impl PivotedQrResult {
    /// Pivots followed by the unselected columns in ascending order.
    pub fn permutation(&self) -> Vec<usize> {
        let mut perm = self.pivots.clone();
        let mut chosen = vec![false; self.r.cols()];
        for &p in &self.pivots {
            chosen[p] = true;
        }
        perm.extend((0..chosen.len()).filter(|&j| !chosen[j]));
        perm
    }

    /// Orthonormal factor, `rows × k`, with `A Pᵀ ≈ Q R` on the pivoted block.
    pub fn q(&self) -> DenseMatrix {
        form_q(self.rows, self.reflectors.len(), &self.reflectors)
    }
}

/// Greedy QR with column pivoting, stopped after `p` pivots.
///
/// At every step the unselected column with the largest residual 2-norm is
/// chosen, then a Householder reflection removes its direction from all
/// remaining columns. Ties within [`PIVOT_TIE_RELATIVE`] go to the lowest
/// index.
pub fn pivoted_qr(a: &DenseMatrix, p: usize) -> Result<PivotedQrResult, LinalgError> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(LinalgError::Empty);
    }
    if p > cols {
        return Err(LinalgError::InvalidArgument(format!(
            "requested {p} pivots from {cols} columns"
        )));
    }
    if p > rows {
        log::warn!("pivoted_qr: {p} pivots requested from {rows} rows; trailing pivots are rank-deficient");
    }

    let mut work = a.clone();
    let mut selected = vec![false; cols];
    let mut pivots = Vec::with_capacity(p);
    let mut r_diagonal = Vec::with_capacity(p);
    let mut reflectors = Vec::with_capacity(p);
    let mut norms = vec![0.0; cols];
    let mut floor = RANK_FLOOR;
    let mut rank_deficient = false;

    for k in 0..p {
        if k >= rows {
            rank_deficient = true;
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..cols {
            if selected[j] {
                continue;
            }
            norms[j] = norm2(&work.column(j)[k..]);
            match best {
                Some((_, b)) if norms[j] <= b => {}
                _ => best = Some((j, norms[j])),
            }
        }
        let Some((_, max_norm)) = best else {
            rank_deficient = true;
            break;
        };
        if k == 0 {
            floor = RANK_FLOOR * max_norm.max(1.0);
        }
        if max_norm < floor {
            rank_deficient = true;
            break;
        }
        // lowest index among the (near-)maximal residuals
        let cut = max_norm * (1.0 - PIVOT_TIE_RELATIVE);
        let pivot = (0..cols).find(|&j| !selected[j] && norms[j] >= cut).expect("maximum exists");

        let (h, alpha) = Reflector::annihilating(k, &work.column(pivot)[k..]);
        for j in 0..cols {
            if !selected[j] {
                h.apply(work.column_mut(j));
            }
        }
        selected[pivot] = true;
        pivots.push(pivot);
        r_diagonal.push(alpha);
        reflectors.push(h);
    }

    let k = pivots.len();
    let mut result = PivotedQrResult {
        pivots,
        r_diagonal,
        r: DenseMatrix::zeros(k, cols),
        rank_deficient,
        rows,
        reflectors,
    };
    let perm = result.permutation();
    for (c, &src) in perm.iter().enumerate() {
        let col = work.column(src);
        for i in 0..k.min(c + 1) {
            result.r[(i, c)] = col[i];
        }
    }
    // the reflector zeroes the pivot column below the diagonal; store that exactly
    for (i, &d) in result.r_diagonal.iter().enumerate() {
        result.r[(i, i)] = d;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn householder_reconstructs() {
        let a = random_matrix(9, 4, 1);
        let qr = householder_qr(&a).unwrap();
        let q = qr.q();
        let back = q.matmul(qr.r()).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-13);
        let qtq = q.tr_matmul(&q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-14);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(qr.r()[(i, j)], 0.0);
            }
        }
        assert!(qr.apply_q(qr.r()).unwrap().sub(&back).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_pivots_by_norm() {
        let a = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let res = pivoted_qr(&a, 3).unwrap();
        assert_eq!(res.pivots, vec![0, 2, 1]);
        let mags: Vec<f64> = res.r_diagonal.iter().map(|v| v.abs()).collect();
        assert_eq!(mags, vec![3.0, 2.0, 1.0]);
        assert!(!res.rank_deficient);
    }

    #[test]
    fn duplicated_column_is_skipped() {
        // [e1 | e1 | e2]
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let res = pivoted_qr(&a, 2).unwrap();
        assert_eq!(res.pivots, vec![0, 2]);
    }

    #[test]
    fn early_stop_on_rank_deficiency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let res = pivoted_qr(&a, 3).unwrap();
        assert_eq!(res.pivots, vec![2]);
        assert!(res.rank_deficient);
        assert_eq!(res.r.rows(), 1);
    }

    #[test]
    fn equal_norms_break_ties_low() {
        let a = DenseMatrix::identity(4);
        assert_eq!(pivoted_qr(&a, 4).unwrap().pivots, vec![0, 1, 2, 3]);
    }

    #[test]
    fn factors_reproduce_pivoted_columns() {
        let a = random_matrix(7, 10, 5);
        let res = pivoted_qr(&a, 5).unwrap();
        let q = res.q();
        let perm = res.permutation();
        let qr = q.matmul(&res.r).unwrap();
        for c in 0..5 {
            for i in 0..7 {
                assert!((qr[(i, c)] - a[(i, perm[c])]).abs() < 1e-13);
            }
        }
        assert!(q.tr_matmul(&q).unwrap().sub(&DenseMatrix::identity(5)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn rejects_too_many_pivots() {
        assert!(pivoted_qr(&DenseMatrix::identity(2), 3).is_err());
    }
}
