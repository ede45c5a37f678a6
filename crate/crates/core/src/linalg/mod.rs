//! Dense linear-algebra kernels: column-major matrices, Householder and
//! column-pivoted QR, one-sided Jacobi SVD and minimum-norm least squares.
//!
//! Everything here is a pure function of its inputs.

mod lstsq;
mod matrix;
mod qr;
mod svd;

use thiserror::Error;

pub use lstsq::{least_squares_minnorm, pseudo_inverse_cutoff, LeastSquaresSolution};
pub use matrix::{axpy, dot, norm2, DenseMatrix};
pub use qr::{householder_qr, pivoted_qr, HouseholderQr, PivotedQrResult, PIVOT_TIE_RELATIVE};
pub use svd::{svd, SvdResult, MAX_JACOBI_SWEEPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("empty matrix")]
    Empty,
    #[error("SVD did not converge after {sweeps} Jacobi sweeps")]
    NoConvergence { sweeps: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
