//! Randomized PCA of matrices too large for RAM.
//!
//! The matrix is only ever touched through streaming passes ([`source`]);
//! [`rpca::randomized_pca`] makes `2 (i + 1)` of them and keeps
//! `O((i+1) l (m+n))` numbers in memory. [`specnorm`] estimates the spectral
//! error of the result in further passes and [`testgen`] produces test
//! matrices with known singular values.

pub mod dct;
pub mod dense;
pub mod error;
pub mod rng;
pub mod rpca;
pub mod scalar;
pub mod source;
pub mod specnorm;
pub mod testgen;

pub use error::{Error, Result};
pub use rpca::{
    error_bound, predict_costs, project_denoise, randomized_pca, CostEstimate, PcaParams, PcaResult,
};
pub use scalar::Scalar;
pub use source::{LinearOperator, MatrixSource, StreamConfig};
pub use specnorm::{
    estimate_norm, estimate_pca_error, failure_probability_bound, NormEstParams, NormEstimate,
};

/// Working-precision dense matrix used for every small factor.
pub type DenseMatrix = dense::Matrix<f64>;
/// Single-precision dense matrix, the element type of on-disk payloads.
pub type DenseMatrix32 = dense::Matrix<f32>;
/// Thin SVD in working precision.
pub type ThinSvd64 = dense::ThinSvd<f64>;
