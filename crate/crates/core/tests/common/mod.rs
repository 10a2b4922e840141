//! Dense oracles shared by the integration tests. Everything here goes
//! through nalgebra, not through the crate's own factorizations.
#![allow(dead_code)]

use nalgebra::DMatrix;
use oocpca::dense::gaussian_matrix;
use oocpca::DenseMatrix;

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn from_na(a: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)])
}

/// Full SVD with singular values in descending order: (U, sigma, V).
pub fn dense_svd(a: &DenseMatrix) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = to_na(a).svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sigma = order.iter().map(|&j| svd.singular_values[j]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (u, sigma, v)
}

pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    dense_svd(a).1
}

pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// `rows x cols` with orthonormal columns, from the QR of a Gaussian block.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let g: DenseMatrix = gaussian_matrix(rows, cols, seed);
    to_na(&g).qr().q()
}

/// `U diag(sigma) Vᵀ` with Haar-like random `U` (`m x r`) and `V` (`n x r`).
pub fn with_spectrum(m: usize, n: usize, sigma: &[f64], seed: u64) -> DenseMatrix {
    let r = sigma.len();
    let u = random_orthonormal(m, r, seed.wrapping_mul(2).wrapping_add(1));
    let v = random_orthonormal(n, r, seed.wrapping_mul(2).wrapping_add(2));
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(sigma));
    from_na(&(u * s * v.transpose()))
}

/// Largest principal angle between the column spans of `a` and `b`
/// (both with orthonormal columns, same width).
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // sin of the largest angle is ‖(I - B Bᵀ) A‖₂
    let resid = a - b * (b.transpose() * a);
    let s = resid.svd(false, false).singular_values.max();
    s.min(1.0).asin()
}

pub fn residual_norm(a: &DenseMatrix, approx: &DenseMatrix) -> f64 {
    spectral_norm(&a.sub(approx).unwrap())
}
