//! Predictive shimming from sparse gap measurements.
//!
//! Historical gap fields are decomposed with robust PCA into low-rank
//! features, a few point sensors are placed by greedy column-pivoted QR
//! (D-optimal), and the full gap field of a new unit is reconstructed from
//! those measurements by least squares in the feature basis.
//!
//! Module map:
//! - [`linalg`]: dense kernels (SVD, pivoted QR, minimum-norm least squares)
//! - [`rpca`]: principal component pursuit
//! - [`basis`]: training matrix, RPCA, optimal hard-threshold truncation
//! - [`sensors`]: exact / oversampled / random sensor selection and D/E/A objectives
//! - [`reconstruct`]: coefficient estimation, full-field prediction, error metrics
//! - [`pipeline`]: leave-one-out cross-validation, segmentation, sensor sweeps
//! - [`datagen`]: synthetic low-rank-plus-sparse data with ground truth
//! - [`io`]: text file formats and run configuration

pub mod basis;
pub mod datagen;
pub mod io;
pub mod linalg;
mod param;
pub mod pipeline;
pub mod reconstruct;
pub mod rpca;
pub mod sensors;

pub use param::AutoOr;
